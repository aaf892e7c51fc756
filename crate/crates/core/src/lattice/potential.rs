//! Potential kernel of simple random walk on ℤ².
//!
//! `a(x) = Σ_n [P(S_n = 0) − P(S_n = x)]`, normalized so `a(0) = 0`, `a(e₁) = 1`.
//! Small arguments come from a one-dimensional integral representation, large
//! ones from the asymptotic expansion
//! `(2/π) log r + k₀ − cos 4φ / (6π r²) − (18 cos 4φ + 25 cos 8φ) / (120π r⁴)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::quad::integrate;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Additive constant of the potential kernel, `(2γ + log 8)/π`.
pub fn k0() -> f64 {
    (2.0 * EULER_GAMMA + 8f64.ln()) / PI
}

/// Arguments with both coordinates at most this size are tabulated exactly.
const TABLE: usize = 40;

fn table() -> &'static Vec<f64> {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let mut t = vec![0.0; (TABLE + 1) * (TABLE + 1)];
        for m in 0..=TABLE {
            for n in 0..=m {
                let v = integral(m as i32, n as i32);
                t[m * (TABLE + 1) + n] = v;
                t[n * (TABLE + 1) + m] = v;
            }
        }
        t
    })
}

/// `a(m, n) = (2/π) ∫₀^π (1 − cos(mθ) tⁿ) / √(c² − 1) dθ`, `c = 2 − cos θ`, `t = c − √(c² − 1)`.
fn integral(m: i32, n: i32) -> f64 {
    if m == 0 && n == 0 {
        return 0.0;
    }
    let f = |th: f64| {
        let c = 2.0 - th.cos();
        // √(c²−1) written without cancellation near θ = 0
        let s = 2.0 * (0.5 * th).sin() * ((3.0 - th.cos()) / 2.0).sqrt();
        let t = 1.0 / (c + s);
        (1.0 - (m as f64 * th).cos() * t.powi(n)) / s
    };
    2.0 / PI * integrate(f, 0.0, PI, 48, 20)
}

fn asymptotic(m: f64, n: f64) -> f64 {
    let r2 = m * m + n * n;
    let phi = n.atan2(m);
    let c4 = (4.0 * phi).cos();
    let c8 = (8.0 * phi).cos();
    (1.0 / PI) * r2.ln() + k0() - c4 / (6.0 * PI * r2) - (18.0 * c4 + 25.0 * c8) / (120.0 * PI * r2 * r2)
}

/// Potential kernel at the lattice vector `(m, n)`.
pub fn potential(m: i32, n: i32) -> f64 {
    let (m, n) = (m.unsigned_abs() as usize, n.unsigned_abs() as usize);
    if m <= TABLE && n <= TABLE {
        table()[m * (TABLE + 1) + n]
    } else {
        asymptotic(m as f64, n as f64)
    }
}
