//! Reference integrator for a single deterministic thermostat, independent of
//! the crate's simulators. Adaptive Dormand-Prince 5(4) with bisection on the
//! threshold crossings.

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub struct Thermostat {
    pub a: [[f64; 2]; 2],
    pub b_off: Vec2,
    pub b_on: Vec2,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LimitCycle {
    pub period: f64,
    pub on_time: f64,
    pub duty: f64,
    /// Mass temperature when the air reaches the upper threshold.
    pub mass_at_upper: f64,
}

impl Thermostat {
    fn rhs(&self, on: bool, x: Vec2) -> Vec2 {
        let b = if on { self.b_on } else { self.b_off };
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + b[1],
        ]
    }

    fn dopri_step(&self, on: bool, x: Vec2, h: f64) -> (Vec2, f64) {
        const C: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut k = [[0.0; 2]; 7];
        k[0] = self.rhs(on, x);
        for s in 0..6 {
            let mut y = x;
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                y[0] += h * C[s][j] * kj[0];
                y[1] += h * C[s][j] * kj[1];
            }
            k[s + 1] = self.rhs(on, y);
        }
        let mut y = x;
        for j in 0..6 {
            y[0] += h * C[5][j] * k[j][0];
            y[1] += h * C[5][j] * k[j][1];
        }
        let mut err = 0.0f64;
        for d in 0..2 {
            let e: f64 = (0..7).map(|j| E[j] * k[j][d]).sum::<f64>() * h;
            err = err.max(e.abs() / (1e-12 + 1e-12 * y[d].abs()));
        }
        (y, err)
    }

    /// Integrates in one mode until the air temperature reaches the mode's
    /// exit threshold. Returns the elapsed time and the exit state.
    pub fn flow_to_switch(&self, on: bool, x0: Vec2) -> (f64, Vec2) {
        let exit = |x: &Vec2| {
            if on {
                x[0] - self.lower
            } else {
                self.upper - x[0]
            }
        };
        let (mut t, mut x, mut h) = (0.0, x0, 1e-3);
        loop {
            let (y, err) = self.dopri_step(on, x, h);
            if err > 1.0 {
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                continue;
            }
            if exit(&y) <= 0.0 {
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let (ym, _) = self.dopri_step(on, x, mid);
                    if exit(&ym) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                let (ye, _) = self.dopri_step(on, x, hi);
                return (t + hi, ye);
            }
            t += h;
            x = y;
            h *= (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
            assert!(t < 1e4, "thermostat never reaches its threshold");
        }
    }

    /// Periodic orbit reached from the upper threshold, iterated until the
    /// mass temperature at the upper switch repeats to 1e-12.
    pub fn limit_cycle(&self, mass0: f64) -> LimitCycle {
        let mut x = [self.upper, mass0];
        for _ in 0..10_000 {
            let (t_on, y) = self.flow_to_switch(true, x);
            let (t_off, z) = self.flow_to_switch(false, [self.lower, y[1]]);
            let done = (z[1] - x[1]).abs() < 1e-12;
            x = [self.upper, z[1]];
            if done {
                return LimitCycle {
                    period: t_on + t_off,
                    on_time: t_on,
                    duty: t_on / (t_on + t_off),
                    mass_at_upper: x[1],
                };
            }
        }
        panic!("limit cycle did not converge");
    }
}
