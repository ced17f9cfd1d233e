//! Reference numerics for the explomax test suites.
//!
//! Nothing in here knows about the mixture model. The quadrature is a plain
//! globally adaptive Gauss-Kronrod (10/21 point) rule over vector-valued
//! integrands, so several posterior functionals can share one set of
//! integrand evaluations, and the finite-difference helpers are textbook
//! central differences.

// Tabulated digits are kept as published.
#![allow(clippy::excessive_precision)]

/// Abscissae of the 21-point Kronrod rule on [-1, 1], descending, center last.
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

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_529_880,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Weights of the embedded 10-point Gauss rule, paired with XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub intervals: usize,
}

#[derive(Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn kronrod<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Segment<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [[0.0; N]; 21];
    for (j, x) in XGK.iter().enumerate().take(10) {
        fv[2 * j] = f(center - half * x);
        fv[2 * j + 1] = f(center + half * x);
    }
    fv[20] = f(center);

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        let mut rk = WGK[10] * fv[20][i];
        let mut rg = 0.0;
        let mut abs = WGK[10] * fv[20][i].abs();
        for j in 0..10 {
            let s = fv[2 * j][i] + fv[2 * j + 1][i];
            rk += WGK[j] * s;
            abs += WGK[j] * (fv[2 * j][i].abs() + fv[2 * j + 1][i].abs());
            if j % 2 == 1 {
                rg += WG[j / 2] * s;
            }
        }
        let mean = 0.5 * rk;
        let mut asc = WGK[10] * (fv[20][i] - mean).abs();
        for j in 0..10 {
            asc += WGK[j] * ((fv[2 * j][i] - mean).abs() + (fv[2 * j + 1][i] - mean).abs());
        }
        let mut err = ((rk - rg) * half).abs();
        let asc = asc * half.abs();
        if asc != 0.0 && err != 0.0 {
            err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
        }
        let abs = abs * half.abs();
        if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * abs);
        }
        value[i] = rk * half;
        error[i] = err;
    }
    Segment { a, b, value, error }
}

/// Globally adaptive Gauss-Kronrod integration of a vector-valued function
/// over the finite interval `[a, b]`.
///
/// Refinement stops once every component satisfies
/// `error <= max(rel_tol * |value|, abs_tol)` or `max_intervals` is reached.
pub fn integrate<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Integral<N>
where
    F: FnMut(f64) -> [f64; N],
{
    let mut segments = vec![kronrod(&mut f, a, b)];
    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for s in &segments {
            for i in 0..N {
                value[i] += s.value[i];
                error[i] += s.error[i];
            }
        }
        let done = (0..N).all(|i| error[i] <= (rel_tol * value[i].abs()).max(abs_tol));
        if done || segments.len() >= max_intervals {
            return Integral {
                value,
                error,
                intervals: segments.len(),
            };
        }
        let scale: [f64; N] = std::array::from_fn(|i| (value[i].abs() * rel_tol).max(abs_tol));
        let badness = |s: &Segment<N>| {
            (0..N)
                .map(|i| s.error[i] / scale[i])
                .fold(0.0_f64, f64::max)
        };
        let (worst, _) = segments
            .iter()
            .enumerate()
            .map(|(k, s)| (k, badness(s)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval cannot be split further in floating point
            segments.push(s);
            let value = segments.iter().fold([0.0; N], |mut acc, s| {
                (0..N).for_each(|i| acc[i] += s.value[i]);
                acc
            });
            return Integral {
                value,
                error,
                intervals: segments.len(),
            };
        }
        segments.push(kronrod(&mut f, s.a, mid));
        segments.push(kronrod(&mut f, mid, s.b));
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let r = integrate(|x| [f(x)], a, b, rel_tol, abs_tol, 5_000);
    (r.value[0], r.error[0])
}

/// Central difference of `f` at `x` with step `h`.
pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Five-point central difference; fourth-order accurate.
pub fn central_difference5<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Gradient of `f` at `x` by five-point differences with per-coordinate
/// steps `rel_step * max(1, |x_i|)`.
pub fn gradient<const N: usize, F>(mut f: F, x: [f64; N], rel_step: f64) -> [f64; N]
where
    F: FnMut([f64; N]) -> f64,
{
    std::array::from_fn(|i| {
        let h = rel_step * x[i].abs().max(1.0);
        central_difference5(
            |t| {
                let mut y = x;
                y[i] = t;
                f(y)
            },
            x[i],
            h,
        )
    })
}

/// Jacobian of a vector function by five-point differences; row `i` holds
/// the partial derivatives of output `i`.
pub fn jacobian<const N: usize, F>(mut f: F, x: [f64; N], rel_step: f64) -> [[f64; N]; N]
where
    F: FnMut([f64; N]) -> [f64; N],
{
    let mut out = [[0.0; N]; N];
    for j in 0..N {
        let h = rel_step * x[j].abs().max(1.0);
        let mut eval = |t: f64| {
            let mut y = x;
            y[j] = t;
            f(y)
        };
        let p2 = eval(x[j] + 2.0 * h);
        let p1 = eval(x[j] + h);
        let m1 = eval(x[j] - h);
        let m2 = eval(x[j] - 2.0 * h);
        for i in 0..N {
            out[i][j] = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
        }
    }
    out
}

/// Relative error with a unit floor on the denominator scale.
pub fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}
