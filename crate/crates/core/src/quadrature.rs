//! One-dimensional numerical integration.
//!
//! [`integrate`] is a globally adaptive Gauss–Kronrod (10/21 point) scheme in
//! the style of QUADPACK's QAG: the interval with the largest error estimate is
//! bisected until the summed error falls below the requested tolerance.
//! Integrands are fallible so that iterated (nested) integrals can surface
//! inner convergence failures. [`simpson`] and [`simpson_irregular`] integrate
//! sampled data.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_426_425,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(relative: f64) -> Self {
        Tolerance {
            relative,
            absolute: 0.0,
            max_intervals: 2000,
        }
    }

    pub fn with_absolute(mut self, absolute: f64) -> Self {
        self.absolute = absolute;
        self
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
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
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gauss_kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center)?;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut res_g = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let error = rescale_error(
        (res_k - res_g) * half,
        res_abs * abs_half,
        res_asc * abs_half,
    );
    if !value.is_finite() {
        return Err(Error::domain(format!(
            "integrand is not finite on [{a:e}, {b:e}]"
        )));
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over `[a, b]` with global adaptive bisection.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }

    let first = gauss_kronrod(&mut f, a, b)?;
    let mut evaluations = 21;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    let target = |v: f64| tol.absolute.max(tol.relative * v.abs());

    while error > target(value) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::NonConvergence {
                estimate: value,
                error_bound: error,
                context: format!("{} subintervals on [{a:e}, {b:e}]", heap.len()),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            return Err(Error::NonConvergence {
                estimate: value,
                error_bound: error,
                context: "subinterval below machine resolution".into(),
            });
        }
        let left = gauss_kronrod(&mut f, worst.a, mid)?;
        let right = gauss_kronrod(&mut f, mid, worst.b)?;
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);

        // Running sums drift; resum once the estimate looks converged.
        if error <= target(value) {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }

    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Composite Simpson rule on uniformly spaced samples.
///
/// An odd number of panels is closed with a Simpson 3/8 panel at the end.
pub fn simpson(values: &[f64], step: f64) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let panels = n - 1;
    if panels == 1 {
        return Ok(0.5 * step * (values[0] + values[1]));
    }
    let (even_end, tail) = if panels.is_multiple_of(2) {
        (n - 1, 0.0)
    } else {
        let m = n - 4;
        (
            m,
            3.0 * step / 8.0
                * (values[m] + 3.0 * values[m + 1] + 3.0 * values[m + 2] + values[m + 3]),
        )
    };
    let mut sum = values[0] + values[even_end];
    for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(sum * step / 3.0 + tail)
}

/// Composite Simpson rule on an arbitrary increasing grid (parabola through
/// each consecutive triple of samples).
pub fn simpson_irregular(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::domain("grid and sample lengths differ"));
    }
    let n = times.len();
    if n < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    if n == 2 {
        return Ok(0.5 * (times[1] - times[0]) * (values[0] + values[1]));
    }
    let panels = n - 1;
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n && (panels - i >= 2) {
        let h0 = times[i + 1] - times[i];
        let h1 = times[i + 2] - times[i + 1];
        let hs = h0 + h1;
        total += hs / 6.0
            * ((2.0 - h1 / h0) * values[i]
                + hs * hs / (h0 * h1) * values[i + 1]
                + (2.0 - h0 / h1) * values[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        // Last single panel: quadratic through the final three points.
        let (t0, t1, t2) = (times[n - 3], times[n - 2], times[n - 1]);
        let (y0, y1, y2) = (values[n - 3], values[n - 2], values[n - 1]);
        let h1 = t1 - t0;
        let h2 = t2 - t1;
        let alpha = (2.0 * h2 * h2 + 3.0 * h1 * h2) / (6.0 * (h1 + h2));
        let beta = (h2 * h2 + 3.0 * h1 * h2) / (6.0 * h1);
        let eta = h2 * h2 * h2 / (6.0 * h1 * (h1 + h2));
        total += alpha * y2 + beta * y1 - eta * y0;
    }
    Ok(total)
}
