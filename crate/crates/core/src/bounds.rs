//! Calculators for the noise and filtering bounds.
//!
//! All information quantities are supplied by the caller in bits; nothing
//! here estimates entropy from data. The constants `c1`, `c2` and `C` are
//! opaque inputs. With the defaults (`c1 = 1`, `c2 = 0`, `C = 1`) outputs are
//! in normalized units.
//!
//! Logarithms inside the fine-tuning spread budget and noise gap are natural.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Information quantities consumed by the noise-impact and feed-forward
/// failure bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundInputs {
    /// `H(w)`: entropy of the relevance information.
    pub h_w: f64,
    /// `I(w; z)`.
    pub i_wz: f64,
    /// `H(Z_r)`: entropy of the relevant-token embeddings.
    pub h_zr: f64,
    /// `H(v)`: total inference information.
    pub h_v: f64,
    /// `I(s; v)`.
    pub i_sv: f64,
    /// `H(w_hat)`.
    pub h_what: f64,
    /// `I(w_hat; v)`.
    pub i_what_v: f64,
    /// Fraction of relevant tokens, in `(0, 1]`.
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Fano denominator `log(|V| / N_max(t))`.
    pub fano_c: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            h_w: 8.0,
            i_wz: 4.0,
            h_zr: 10.0,
            h_v: 6.0,
            i_sv: 4.0,
            h_what: 8.0,
            i_what_v: 4.0,
            delta: 0.5,
            c1: 1.0,
            c2: 0.0,
            fano_c: 1.0,
        }
    }
}

impl BoundInputs {
    /// `H(w | z) = H(w) - I(w; z)`.
    pub fn h_w_given_z(&self) -> f64 {
        self.h_w - self.i_wz
    }

    /// `H(w_hat | v) = H(w_hat) - I(w_hat; v)`.
    pub fn h_what_given_v(&self) -> f64 {
        self.h_what - self.i_what_v
    }

    fn check_common(&self) -> Result<()> {
        let entropies = [self.h_w, self.h_zr, self.h_v, self.h_what, self.i_sv];
        if entropies.iter().any(|&h| !(h >= 0.0)) {
            return domain("entropies and mutual informations must be non-negative");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return domain(format!("relevant fraction delta={} must lie in (0, 1]", self.delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped {
    pub raw: f64,
    pub value: f64,
    /// Raw value was outside `[0, 1]`.
    pub vacuous: bool,
}

impl Clamped {
    fn probability(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        Self {
            raw,
            value,
            vacuous: raw <= 0.0 || raw >= 1.0,
        }
    }
}

/// Fano lower bound on the relevance misclassification rate,
/// `(H(w) - I(w; z) - 1) / H(w)`.
pub fn fano_error_lower(h_w: f64, i_wz: f64) -> Result<Clamped> {
    if !(h_w > 0.0) {
        return domain(format!("H(w)={h_w} must be positive"));
    }
    if !(0.0..=h_w).contains(&i_wz) {
        return domain(format!("I(w;z)={i_wz} must lie in [0, H(w)]"));
    }
    Ok(Clamped::probability((h_w - i_wz - 1.0) / h_w))
}

/// Share of surviving tokens that are distractors after a filter with error
/// rate `p_e` is applied to a stream with relevant fraction `delta`.
pub fn distraction_fraction(delta: f64, p_e: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("delta={delta} must lie in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&p_e) {
        return domain(format!("p_e={p_e} must lie in [0, 1]"));
    }
    let noise = (1.0 - delta) * p_e;
    let kept = delta * (1.0 - p_e);
    let denom = noise + kept;
    if denom == 0.0 {
        // delta = 1 and p_e = 1: nothing survives, and nothing was noise.
        return Ok(0.0);
    }
    Ok(noise / denom)
}

/// Lower bound on the distraction fraction obtained by feeding the Fano
/// bound through [`distraction_fraction`] in closed form:
/// `(1 - delta) / (delta / p_e - 2 delta + 1)`.
pub fn distraction_lower_bound(delta: f64, h_w: f64, i_wz: f64) -> Result<f64> {
    let p_e = fano_error_lower(h_w, i_wz)?.value;
    if p_e == 0.0 {
        return Ok(0.0);
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("delta={delta} must lie in (0, 1]"));
    }
    Ok((1.0 - delta) / (delta / p_e - 2.0 * delta + 1.0))
}

/// Right-hand side of the noise-impact bound on `L(delta) - L(1)`:
/// `c1 sqrt((1 - delta) H(w|z) / (delta (I(w;z) + 1)) * H(Z_r)) + c2`.
pub fn noise_impact_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check_common()?;
    if !(0.0..=inputs.h_w).contains(&inputs.i_wz) {
        return domain("I(w;z) must lie in [0, H(w)]");
    }
    let ratio = (1.0 - inputs.delta) * inputs.h_w_given_z() / (inputs.delta * (inputs.i_wz + 1.0));
    Ok(inputs.c1 * (ratio * inputs.h_zr).sqrt() + inputs.c2)
}

/// Largest spread of fine-tuning score offsets over relevant pairs that
/// still permits an `epsilon`-approximation of the filtered attention:
/// `ln(1 / (1 - epsilon))`.
pub fn lora_spread_budget(epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return domain(format!("epsilon={epsilon} must lie in [0, 1)"));
    }
    Ok(-(1.0 - epsilon).ln())
}

/// Bound on the gap between noise and relevant score offsets,
/// `spread + ln(epsilon^2 n)`. May be negative.
pub fn lora_noise_gap(spread: f64, epsilon: f64, n_tokens: u64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return domain(format!("epsilon={epsilon} must be positive"));
    }
    if n_tokens == 0 {
        return domain("token count must be at least 1");
    }
    Ok(spread + (epsilon * epsilon * n_tokens as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MlpFailureBound {
    /// Lower bound on `P(||f - f_hat|| > t')`.
    pub probability: Clamped,
    pub t_prime: f64,
}

/// Feed-forward failure bound. `t_base` is the tolerance `t` before the
/// information-dependent widening.
pub fn mlp_failure_bound(inputs: &BoundInputs, t_base: f64) -> Result<MlpFailureBound> {
    let delta = inputs.delta;
    let entropies = [inputs.h_v, inputs.i_sv, inputs.h_what];
    if entropies.iter().any(|&h| !(h >= 0.0)) {
        return domain("entropies and mutual informations must be non-negative");
    }
    // delta = 0 is meaningful here: the filter term vanishes.
    if !(0.0..=1.0).contains(&delta) {
        return domain(format!("delta={delta} must lie in [0, 1]"));
    }
    if !(inputs.fano_c > 0.0) {
        return domain("the Fano denominator C must be positive");
    }
    if !(inputs.h_what > 0.0) {
        return domain("H(w_hat) must be positive");
    }
    if !(0.0..=inputs.h_what).contains(&inputs.i_what_v) {
        return domain("I(w_hat; v) must lie in [0, H(w_hat)]");
    }
    let filter = delta * (inputs.i_what_v + 1.0) / inputs.h_what * inputs.i_sv;
    let raw = (inputs.h_v - filter) / inputs.fano_c;
    let radicand = (1.0 - delta) * (inputs.h_what_given_v() - 1.0) / inputs.h_what * inputs.i_sv;
    // H(w_hat|v) < 1 makes the radicand negative; the widening is then zero.
    let t_prime = t_base + inputs.c1 * radicand.max(0.0).sqrt() + inputs.c2;
    Ok(MlpFailureBound {
        probability: Clamped::probability(raw),
        t_prime,
    })
}

/// One row of a bound sweep: inputs plus every derived output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSweepRow {
    pub h_w: f64,
    pub i_wz: f64,
    pub h_zr: f64,
    pub h_v: f64,
    pub i_sv: f64,
    pub h_what: f64,
    pub i_what_v: f64,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub fano_c: f64,
    pub fano_raw: f64,
    pub fano_p_e: f64,
    pub fano_vacuous: bool,
    pub alpha: f64,
    pub noise_bound: f64,
    pub mlp_raw: f64,
    pub mlp_p: f64,
    pub mlp_vacuous: bool,
    pub t_prime: f64,
}

pub fn evaluate_row(inputs: &BoundInputs, t_base: f64) -> Result<BoundSweepRow> {
    let fano = fano_error_lower(inputs.h_w, inputs.i_wz)?;
    let mlp = mlp_failure_bound(inputs, t_base)?;
    Ok(BoundSweepRow {
        h_w: inputs.h_w,
        i_wz: inputs.i_wz,
        h_zr: inputs.h_zr,
        h_v: inputs.h_v,
        i_sv: inputs.i_sv,
        h_what: inputs.h_what,
        i_what_v: inputs.i_what_v,
        delta: inputs.delta,
        c1: inputs.c1,
        c2: inputs.c2,
        fano_c: inputs.fano_c,
        fano_raw: fano.raw,
        fano_p_e: fano.value,
        fano_vacuous: fano.vacuous,
        alpha: distraction_fraction(inputs.delta, fano.value)?,
        noise_bound: noise_impact_bound(inputs)?,
        mlp_raw: mlp.probability.raw,
        mlp_p: mlp.probability.value,
        mlp_vacuous: mlp.probability.vacuous,
        t_prime: mlp.t_prime,
    })
}

/// Sweeps `delta` and `I(w; z)` over evenly spaced grids, holding the other
/// inputs fixed.
pub fn sweep_delta_iwz(base: &BoundInputs, steps: usize, t_base: f64) -> Result<Vec<BoundSweepRow>> {
    if steps < 2 {
        return domain("sweep needs at least 2 steps per axis");
    }
    let mut rows = Vec::with_capacity(steps * steps);
    for a in 0..steps {
        let delta = 0.05 + 0.95 * a as f64 / (steps - 1) as f64;
        for b in 0..steps {
            let i_wz = base.h_w * b as f64 / (steps - 1) as f64;
            let inputs = BoundInputs { delta, i_wz, ..*base };
            rows.push(evaluate_row(&inputs, t_base)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fano_values() {
        assert!((fano_error_lower(8.0, 5.0).unwrap().value - 0.25).abs() < 1e-12);
        let perfect = fano_error_lower(8.0, 8.0).unwrap();
        assert_eq!(perfect.value, 0.0);
        assert!(perfect.raw < 0.0 && perfect.vacuous);
        let one_bit = fano_error_lower(1.0, 0.0).unwrap();
        assert_eq!((one_bit.raw, one_bit.value), (0.0, 0.0));
        assert!(fano_error_lower(0.0, 0.0).is_err());
        assert!(fano_error_lower(4.0, 5.0).is_err());
    }

    #[test]
    fn distraction_values() {
        assert!((distraction_fraction(0.5, 0.25).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(distraction_fraction(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(distraction_fraction(1.0, 0.0).unwrap(), 0.0);
        for delta in [0.1, 0.4, 0.9] {
            let a = distraction_fraction(delta, 0.5).unwrap();
            assert!((a - (1.0 - delta)).abs() < 1e-12);
        }
        assert!(distraction_fraction(0.0, 0.5).is_err());
    }

    #[test]
    fn noise_bound_values() {
        let inputs = BoundInputs {
            h_w: 7.0,
            i_wz: 3.0,
            h_zr: 10.0,
            delta: 0.5,
            c1: 1.0,
            c2: 0.0,
            ..Default::default()
        };
        assert!((noise_impact_bound(&inputs).unwrap() - 10f64.sqrt()).abs() < 1e-4);
        let all_relevant = BoundInputs { delta: 1.0, c2: 0.7, ..inputs };
        assert_eq!(noise_impact_bound(&all_relevant).unwrap(), 0.7);
        let ignores_docs = BoundInputs { h_zr: 0.0, c2: 0.3, ..inputs };
        assert_eq!(noise_impact_bound(&ignores_docs).unwrap(), 0.3);
    }

    #[test]
    fn spread_budget_values() {
        assert_eq!(lora_spread_budget(0.0).unwrap(), 0.0);
        assert!((lora_spread_budget(0.1).unwrap() - 0.10536).abs() < 1e-5);
        assert!((lora_spread_budget(0.5).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(lora_spread_budget(1.0).is_err());
    }

    #[test]
    fn noise_gap_values() {
        assert!((lora_noise_gap(0.1, 0.1, 100).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(lora_noise_gap(0.0, 1.0, 1).unwrap(), 0.0);
        assert!((lora_noise_gap(0.2, 0.05, 400).unwrap() - 0.2).abs() < 1e-12);
        assert!(lora_noise_gap(0.1, 0.0, 10).is_err());
    }

    #[test]
    fn mlp_bound_values() {
        let inputs = BoundInputs {
            h_v: 6.0,
            delta: 0.8,
            i_what_v: 7.0,
            h_what: 8.0,
            i_sv: 4.0,
            fano_c: 8.0,
            ..Default::default()
        };
        let b = mlp_failure_bound(&inputs, 1.0).unwrap();
        assert!((b.probability.raw - 0.35).abs() < 1e-12);
        assert!(!b.probability.vacuous);
        // H(w_hat|v) = 1 kills the widening term.
        assert!((b.t_prime - (1.0 + inputs.c2)).abs() < 1e-12);

        let no_filter = BoundInputs { delta: 0.0, i_sv: 123.0, ..inputs };
        let b = mlp_failure_bound(&no_filter, 0.0).unwrap();
        assert!((b.probability.raw - 6.0 / 8.0).abs() < 1e-12);
    }
}
