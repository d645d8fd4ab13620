//! Predicted limits for shifted correlation products.
//!
//! For an expression in cases I through IV with top degree d, the averages
//! of e(a(n+n_1))^(k_1) ... e(a(n+n_s))^(k_s) converge, and the limit is a
//! Fourier coefficient of a single measure on the circle: the limiting
//! distribution of the normalized top derivative a^(d)/d!.  Which
//! coefficient survives, and whether the limit is forced to zero outright,
//! depends on the shift pattern only through a family of linear conditions.
//! Those conditions come in two equivalent forms, one in powers of the
//! shifts and one in binomial coefficients.  The binomial form is what a
//! degree-d unipotent tower produces along its orbit, so checking that both
//! routes predict the same number is a meaningful consistency test, not a
//! tautology: the frequencies differ by a factor d! and the measures by the
//! matching dilation.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::correlation::CorrelationQuery;
use crate::error::{Error, Result};
use crate::hardy::{CaseId, Classification, D_MAX};
use crate::torus::TorusPoint;

/// Exact rational with unbounded integers, for binomial sums whose
/// intermediate products overflow machine words at large shifts.
pub type BigRat = Ratio<BigInt>;

/// Largest stored frequency a Fourier-table measure may carry.
pub const MAX_FOURIER_K: i64 = 64;

/// How close the two prediction routes must land to count as reconciled.
/// Both sides are exact up to final rounding into f64, so the bar is set
/// well below anything a genuine mismatch could sneak under.
pub const RECONCILE_TOL: f64 = 1e-12;

/// A probability measure on the circle, described by exactly what the
/// prediction formulas consume: its Fourier coefficients.
#[derive(Debug, Clone)]
pub enum MeasureSpec {
    /// Lebesgue measure.  Every nonzero frequency vanishes.
    Uniform,
    /// A single atom.  The position is held at 256-bit resolution so that
    /// integer-multiplied frequencies stay exact far past f64 range.
    PointMass(TorusPoint),
    /// Explicit coefficients for |k| <= max_k, stored densely with the
    /// coefficient at frequency k sitting at index (k + max_k).
    FourierTable { max_k: i64, coeffs: Vec<Complex64> },
}

impl MeasureSpec {
    pub fn uniform() -> MeasureSpec {
        MeasureSpec::Uniform
    }

    pub fn point_mass(position: TorusPoint) -> MeasureSpec {
        MeasureSpec::PointMass(position)
    }

    /// Builds a table measure from sparse entries at nonzero frequencies.
    /// Absent frequencies inside the range are zero.  An explicit entry at
    /// k = 0 is allowed but must equal 1.  The entries must satisfy the
    /// positive-measure constraints |c_k| <= 1 and c_{-k} = conj(c_k);
    /// violating either is reported rather than silently repaired.
    pub fn fourier_table(entries: &BTreeMap<i64, Complex64>) -> Result<MeasureSpec> {
        let max_k = entries.keys().map(|k| k.abs()).max().unwrap_or(0);
        if max_k > MAX_FOURIER_K {
            return Err(Error::Measure(format!(
                "table frequency range {max_k} exceeds the cap {MAX_FOURIER_K}"
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * max_k + 1) as usize];
        coeffs[max_k as usize] = Complex64::new(1.0, 0.0);
        for (&k, &v) in entries {
            if k == 0 {
                if (v - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                    return Err(Error::Measure(format!(
                        "coefficient at frequency 0 must be 1, got {v}"
                    )));
                }
                continue;
            }
            if v.norm() > 1.0 + 1e-12 {
                return Err(Error::Measure(format!(
                    "coefficient at frequency {k} has modulus {} > 1",
                    v.norm()
                )));
            }
            let mirror = entries.get(&-k).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (mirror - v.conj()).norm() > 1e-12 {
                return Err(Error::Measure(format!(
                    "coefficients at {k} and {} are not conjugate",
                    -k
                )));
            }
            coeffs[(k + max_k) as usize] = v;
        }
        Ok(MeasureSpec::FourierTable { max_k, coeffs })
    }

    /// The Fourier coefficient at an arbitrary integer frequency.
    pub fn fourier(&self, k: &BigInt) -> Result<Complex64> {
        match self {
            MeasureSpec::Uniform => Ok(if k.is_zero() {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }),
            MeasureSpec::PointMass(position) => Ok(position.mul_bigint(k).to_unit()),
            MeasureSpec::FourierTable { max_k, coeffs } => {
                let ki = k
                    .to_i64()
                    .filter(|ki| ki.abs() <= *max_k)
                    .ok_or(Error::FourierOutOfRange {
                        k: k.to_i64().unwrap_or(i64::MAX),
                        max_k: *max_k,
                    })?;
                Ok(coeffs[(ki + max_k) as usize])
            }
        }
    }

    /// The image of the measure under t -> c*t on the circle.  A point mass
    /// moves exactly; a table keeps only the frequencies that pull back into
    /// its stored range, since lambda-hat(k) of the image equals
    /// lambda-hat(c*k) of the original.
    pub fn pushforward_scale(&self, c: u64) -> MeasureSpec {
        assert!(c >= 1, "scale factor must be positive");
        match self {
            MeasureSpec::Uniform => MeasureSpec::Uniform,
            MeasureSpec::PointMass(position) => MeasureSpec::PointMass(position.mul_u128(c as u128)),
            MeasureSpec::FourierTable { max_k, coeffs } => {
                let new_k = max_k / c as i64;
                let mut new_coeffs = vec![Complex64::new(0.0, 0.0); (2 * new_k + 1) as usize];
                for k in -new_k..=new_k {
                    new_coeffs[(k + new_k) as usize] = coeffs[(k * c as i64 + max_k) as usize];
                }
                MeasureSpec::FourierTable { max_k: new_k, coeffs: new_coeffs }
            }
        }
    }

    /// Short human-readable form for result records.
    pub fn label(&self) -> String {
        match self {
            MeasureSpec::Uniform => "uniform".to_string(),
            MeasureSpec::PointMass(position) => format!("point_mass({:.17})", position.to_f64()),
            MeasureSpec::FourierTable { max_k, .. } => format!("fourier_table(K={max_k})"),
        }
    }
}

/// A degree-d unipotent tower with the base coordinate distributed by
/// `lambda`.  The orbit observable is the exponential of the top tower
/// coordinate, which after n steps is the binomial form evaluated by
/// [`unipotent_orbit_phase`].
#[derive(Debug, Clone)]
pub struct UnipotentModel {
    pub d: i64,
    pub lambda: MeasureSpec,
}

impl UnipotentModel {
    pub fn new(d: i64, lambda: MeasureSpec) -> Result<UnipotentModel> {
        if !(0..=D_MAX).contains(&d) {
            return Err(Error::Measure(format!(
                "model degree {d} outside the supported range 0..={D_MAX}"
            )));
        }
        Ok(UnipotentModel { d, lambda })
    }
}

/// Shift offsets with the dilation folded in: the query (n, k, r) acts on
/// index products exactly like ((r*n), k, 1).
fn effective_shifts(q: &CorrelationQuery) -> Vec<i64> {
    q.shifts.iter().map(|&n| n * q.r as i64).collect()
}

/// d! as an exact machine integer; the degree cap keeps this tiny.
pub fn factorial(d: i64) -> u64 {
    assert!((0..=20).contains(&d));
    (1..=d as u64).product::<u64>().max(1)
}

/// The generalized binomial coefficient C(n, i) for any integer n, as the
/// falling factorial n(n-1)...(n-i+1) over i!.  Integer-valued for every
/// integer n, including negative ones.
pub fn binom_bigint(n: i64, i: u32) -> BigInt {
    binom_i128(n as i128, i)
}

/// binom_bigint for times wider than i64, which floor orbits produce.
pub fn binom_i128(n: i128, i: u32) -> BigInt {
    let mut num = BigInt::one();
    for j in 0..i as i128 {
        num *= BigInt::from(n - j);
    }
    let mut den = BigInt::one();
    for j in 1..=i as i128 {
        den *= BigInt::from(j);
    }
    // Exact: i! divides any product of i consecutive integers.
    num / den
}

/// The power-sum test at degree d.  Returns whether every weighted power
/// sum below degree d cancels, together with the surviving frequency
/// l_d = sum_j k_j n_j^d.  The i = 0 sum uses the convention 0^0 = 1, so it
/// is simply the signed factor count.  The prediction is zero unless the
/// low sums all cancel.
pub fn power_sum_condition(q: &CorrelationQuery, d: i64) -> (bool, BigInt) {
    let shifts = effective_shifts(q);
    let weighted_sum = |i: u32| -> BigInt {
        shifts
            .iter()
            .zip(&q.signs)
            .map(|(&n, &k)| BigInt::from(k) * BigInt::from(n).pow(i))
            .sum()
    };
    let cancels = (0..d).all(|i| weighted_sum(i as u32).is_zero());
    (cancels, weighted_sum(d as u32))
}

/// The binomial-coefficient test at degree d, the form a unipotent tower
/// sees.  Returns whether c_i = sum_j k_j C(n_j, i) cancels for every
/// i < d, together with the surviving model frequency c_d.  The two tests
/// accept exactly the same shift patterns, and on acceptance
/// c_d = l_d / d!; both facts are exercised exhaustively in the tests.
pub fn binom_condition(q: &CorrelationQuery, d: i64) -> (bool, BigRat) {
    let shifts = effective_shifts(q);
    let weighted_sum = |i: u32| -> BigInt {
        shifts
            .iter()
            .zip(&q.signs)
            .map(|(&n, &k)| BigInt::from(k) * binom_bigint(n, i))
            .sum()
    };
    let cancels = (0..d).all(|i| weighted_sum(i as u32).is_zero());
    (cancels, BigRat::from_integer(weighted_sum(d as u32)))
}

/// The limiting value of the shifted product average for an expression in
/// cases I through IV, with `lambda` the limiting distribution of
/// a^(d)/d! mod 1.  Case V carriers are refused; reduce them to their inner
/// expression first.  Floors are likewise out of scope here, since their
/// correlations mix two sources.
pub fn predict_correlation(
    cls: &Classification,
    lambda: &MeasureSpec,
    q: &CorrelationQuery,
) -> Result<Complex64> {
    q.validate()?;
    if cls.case_id == CaseId::V {
        return Err(Error::HypothesisUnmet(
            "predictions cover cases I-IV; reduce the case V carrier to its inner part".to_string(),
        ));
    }
    let (cancels, l_d) = power_sum_condition(q, cls.d);
    if !cancels {
        return Ok(Complex64::new(0.0, 0.0));
    }
    lambda.fourier(&l_d)
}

/// The measure the prediction formulas expect for this classification, when
/// one exists: uniform in case I, the atom at the leading coefficient in
/// case IV.  Cases II and III have no single limiting measure over the full
/// average (their distributions stabilize only along subsequence ladders),
/// and case V is out of scope, so those return None.
pub fn lambda_for(cls: &Classification) -> Option<MeasureSpec> {
    match cls.case_id {
        CaseId::I => Some(MeasureSpec::Uniform),
        CaseId::IV => cls
            .alpha
            .as_ref()
            .map(|alpha| MeasureSpec::PointMass(TorusPoint::from_exact(alpha))),
        _ => None,
    }
}

/// The observable along the model orbit after n steps, started at tower
/// coordinates y = (y_0, ..., y_d): the exponential of
/// sum_{i=0}^{d} C(n, i) * y_{d-i}.  All binomials are exact integers and
/// the accumulation runs on 256-bit circle coordinates, so the phase is
/// exact to the final rounding.
pub fn unipotent_orbit_phase(model: &UnipotentModel, y: &[TorusPoint], n: i64) -> Complex64 {
    assert_eq!(
        y.len() as i64,
        model.d + 1,
        "orbit start needs d+1 tower coordinates"
    );
    let mut acc = TorusPoint::from_rat(0, 1);
    for i in 0..=model.d {
        let c = binom_bigint(n, i as u32);
        acc = acc.add(y[(model.d - i) as usize].mul_bigint(&c));
    }
    acc.to_unit()
}

/// The expected value of the shifted product along the model orbit, with
/// the base coordinate integrated by the model's measure and every higher
/// tower coordinate by Lebesgue.  The higher integrations force the low
/// binomial sums to cancel; what survives is the base-measure coefficient
/// at c_d.
pub fn unipotent_expected_correlation(
    model: &UnipotentModel,
    q: &CorrelationQuery,
) -> Result<Complex64> {
    q.validate()?;
    let (cancels, c_d) = binom_condition(q, model.d);
    if !cancels {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if c_d.is_integer() {
        return model.lambda.fourier(c_d.numer());
    }
    // Integer shifts always make c_d an integer once the lower sums cancel,
    // so this branch is defensive.  A non-integer frequency is not a circle
    // character: the uniform case keeps the indicator convention, an atom
    // is evaluated in floating point, and a table has nothing to offer.
    match &model.lambda {
        MeasureSpec::Uniform => Ok(Complex64::new(0.0, 0.0)),
        MeasureSpec::PointMass(position) => {
            let phase = (c_d.to_f64().unwrap_or(0.0) * position.to_f64()).rem_euclid(1.0);
            Ok(Complex64::from_polar(1.0, std::f64::consts::TAU * phase))
        }
        MeasureSpec::FourierTable { .. } => Err(Error::NonIntegerFrequency(c_d.to_string())),
    }
}

/// Both prediction routes for one query, and whether they agree.
#[derive(Debug, Clone, Copy)]
pub struct Reconciliation {
    /// Direct route: the measure's coefficient at l_d.
    pub direct: Complex64,
    /// Model route: the dilated measure's coefficient at c_d = l_d/d!.
    pub model: Complex64,
    pub matched: bool,
}

/// Runs the direct prediction and the unipotent-model prediction side by
/// side.  The model's base measure is the image of `lambda` under
/// t -> d!*t, matching the factor between the top derivative and its
/// normalized form; the two routes must then agree at every query, and a
/// mismatch beyond [`RECONCILE_TOL`] signals an inconsistency in one of the
/// formulas rather than numerical noise.
pub fn model_reconciliation(
    cls: &Classification,
    lambda: &MeasureSpec,
    q: &CorrelationQuery,
) -> Result<Reconciliation> {
    let direct = predict_correlation(cls, lambda, q)?;
    let model = UnipotentModel::new(cls.d, lambda.pushforward_scale(factorial(cls.d)))?;
    let model_value = unipotent_expected_correlation(&model, q)?;
    Ok(Reconciliation {
        direct,
        model: model_value,
        matched: (direct - model_value).norm() <= RECONCILE_TOL,
    })
}
