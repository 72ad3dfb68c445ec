//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    // Kronrod–Gauss difference, floored at the panel's rounding noise.
    let error = ((kronrod - gauss) * h).abs().max(50.0 * f64::EPSILON * value.abs());
    Panel { a, b, value, error }
}

/// Integrate `f` over `[a, b]`, starting from `initial_panels` equal panels
/// and bisecting the worst panel until the summed error estimate is at most
/// `rel_tol · |integral|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, initial_panels: usize, rel_tol: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::invalid(format!("empty integration interval [{a}, {b}]")));
    }
    // Panel errors are floored at rounding noise, so tighter targets are unreachable.
    let rel_tol = rel_tol.max(100.0 * f64::EPSILON);
    let panels = initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 4);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        heap.push(gk15(&f, lo, hi));
    }
    const MAX_SPLITS: usize = 100_000;
    let (mut total, mut err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    for _ in 0..MAX_SPLITS {
        if !total.is_finite() {
            return Err(Error::numeric("integrand is not finite"));
        }
        if err <= rel_tol * total.abs() || err == 0.0 {
            return Ok(heap.iter().map(|p| p.value).sum());
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::numeric("quadrature panel collapsed before reaching tolerance"));
        }
        let (left, right) = (gk15(&f, worst.a, mid), gk15(&f, mid, worst.b));
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    Err(Error::numeric("adaptive quadrature did not converge"))
}
