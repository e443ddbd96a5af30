//! Globally adaptive Gauss-Kronrod (7/15) quadrature over a user partition.

use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    let mut fv = [(0.0, 0.0); 7];
    for (j, slot) in fv.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        *slot = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error: err }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, seeding the adaptive
/// bisection with the given breakpoints. Stops once the summed error
/// estimate is below `max(abs_tol, rel_tol * |I|)` or `max_segments` is hit.
pub fn integrate<F>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64, max_segments: usize) -> QuadResult
where
    F: Fn(f64) -> f64,
{
    assert!(breaks.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(qk15(&f, w[0], w[1]));
            evaluations += 15;
        }
    }
    let totals = |heap: &BinaryHeap<Segment>| {
        // Sum in a fixed order so results do not depend on heap layout.
        let mut segs: Vec<&Segment> = heap.iter().collect();
        segs.sort_by(|x, y| x.a.total_cmp(&y.a));
        segs.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    let (mut value, mut error) = totals(&heap);
    let mut converged = error <= abs_tol.max(rel_tol * value.abs());
    while !converged && heap.len() < max_segments {
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval at floating-point resolution; keep it and stop refining.
            heap.push(worst);
            break;
        }
        let left = qk15(&f, worst.a, mid);
        let right = qk15(&f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        converged = error <= abs_tol.max(rel_tol * value.abs());
    }
    let (value, abs_error) = totals(&heap);
    QuadResult {
        value,
        abs_error,
        evaluations,
        converged: converged || abs_error <= abs_tol.max(rel_tol * value.abs()),
    }
}
