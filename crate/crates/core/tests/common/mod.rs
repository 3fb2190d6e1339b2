#![allow(dead_code)]

pub mod oracle;

use loadsim::model::EtpParameters;
use oracle::Thermostat;

pub fn thermostat(p: &EtpParameters, setpoint_shift: f64) -> Thermostat {
    let u = p.setpoint + setpoint_shift;
    Thermostat {
        a: [[p.a[(0, 0)], p.a[(0, 1)]], [p.a[(1, 0)], p.a[(1, 1)]]],
        b_off: [p.b_off[0], p.b_off[1]],
        b_on: [p.b_on[0], p.b_on[1]],
        lower: u - p.deadband,
        upper: u + p.deadband,
    }
}
