//! Adaptive Gauss–Kronrod (7/15) quadrature and the exponential-weight
//! expectation built on it.

use crate::error::{Error, Result};

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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 2_000;
/// Relative accuracy floor; absolute tolerances are meaningless for large integrals.
const REL_TOL: f64 = 1e-13;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let sum = f(centre - dx) + f(centre + dx);
        kronrod += w * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` (or relative
/// accuracy 1e-13, whichever is looser).
///
/// Global adaptive bisection of the interval with the largest error estimate.
/// Fails with [`Error::BracketFailure`] if the subdivision budget runs out.
/// Non-finite values are passed through for the caller to classify.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut err = e;
    let mut value = v;
    while err > tol.max(REL_TOL * value.abs()) && err.is_finite() {
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::BracketFailure(format!(
                "quadrature on [{a}, {b}] did not reach tolerance {tol:e} (estimate {err:e})"
            )));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval at machine resolution; keep what we have.
            pieces.push((lo, hi, pv, 0.0));
            err -= pe;
            continue;
        }
        let (lv, le) = gk15(&f, lo, mid);
        let (rv, re) = gk15(&f, mid, hi);
        value += lv + rv - pv;
        err += le + re - pe;
        pieces.push((lo, mid, lv, le));
        pieces.push((mid, hi, rv, re));
    }
    Ok(pieces.iter().map(|p| p.2).sum())
}

/// `E[f(X)]` for `X ~ Exp(rate)`, i.e. `∫₀^∞ f(x) rate·e^{-rate·x} dx`.
///
/// The half-line is cut at `breaks` (kinks of `f`) and then walked in blocks of
/// eight mean lengths until a block contributes less than `tol * 1e-3`. A walk
/// that never settles is reported as `None` (divergent expectation).
pub fn exp_expectation<F: Fn(f64) -> f64>(
    f: F,
    rate: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<Option<f64>> {
    let weighted = |x: f64| {
        let w = rate * (-rate * x).exp();
        if w == 0.0 {
            0.0
        } else {
            f(x) * w
        }
    };
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && b.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut lo = 0.0;
    let mut total = 0.0;
    for &c in &cuts {
        total += integrate(weighted, lo, c, tol * 0.1)?;
        lo = c;
    }
    let block = 8.0 / rate;
    let mut quiet = 0;
    for _ in 0..4_000 {
        let hi = lo + block;
        let part = match integrate(weighted, lo, hi, tol * 0.01) {
            Ok(p) if p.is_finite() => p,
            _ => return Ok(None),
        };
        total += part;
        lo = hi;
        if part.abs() < (tol * 1e-3).max(1e-15 * total.abs()) {
            quiet += 1;
            if quiet >= 2 {
                return Ok(Some(total));
            }
        } else {
            quiet = 0;
        }
    }
    Ok(None)
}
