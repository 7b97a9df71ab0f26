use num_complex::Complex64;

use crate::channel::{burst_window, BurstProfile, PhyContext};
use crate::modulation::CONSTELLATION;
use crate::{PhyError, Result};

/// Log density of one received sample under the equiprobable constellation
/// mixture with circularly symmetric complex noise of total variance `var`:
/// `ln( (1/4) sum_s exp(-|x - s|^2 / var) / (pi var) )`.
fn log_symbol_mixture(x: Complex64, var: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut exps = [0.0f64; 4];
    for (i, s) in CONSTELLATION.iter().enumerate() {
        let e = -(x - s).norm_sqr() / var;
        exps[i] = e;
        if e > best {
            best = e;
        }
    }
    let sum: f64 = exps.iter().map(|e| (e - best).exp()).sum();
    best + sum.ln() - (4.0 * std::f64::consts::PI * var).ln()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let best = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    best + terms.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
}

/// Frame log density for a fixed burst window: per-symbol mixtures
/// factorize, with the in-window symbols at the raised variance.
fn frame_log(clean: &[f64], bursty: &[f64], window: Option<(usize, usize)>) -> f64 {
    let mut lp: f64 = clean.iter().sum();
    if let Some((lo, hi)) = window {
        for t in lo..hi {
            lp += bursty[t] - clean[t];
        }
    }
    lp
}

/// Exact log conditional density of a received frame given its context.
///
/// What the context leaves unknown is marginalized exactly: the burst start
/// uniformly over the frame for the moderate level, and additionally the
/// burst occurrence for the least informative level. The burst window is
/// clipped at the frame end, matching the channel.
pub fn log_likelihood(received: &[Complex64], context: &PhyContext) -> Result<f64> {
    let t = received.len();
    if t == 0 {
        return Err(PhyError::InvalidInput("received frame is empty".into()));
    }
    let base_var = context.noise_var();
    let burst_var = base_var + context.interference_var();
    let clean: Vec<f64> = received.iter().map(|x| log_symbol_mixture(*x, base_var)).collect();

    let marginal_over_start = |burst_len: usize, bursty: &[f64]| -> f64 {
        let terms: Vec<f64> = (0..t)
            .map(|start| frame_log(&clean, bursty, burst_window(true, start, burst_len, t)))
            .collect();
        log_sum_exp(&terms) - (t as f64).ln()
    };

    let lp = match &context.burst {
        BurstProfile::Most { active, burst_len, burst_start } => {
            let bursty: Vec<f64> = if *active {
                received.iter().map(|x| log_symbol_mixture(*x, burst_var)).collect()
            } else {
                Vec::new()
            };
            frame_log(&clean, &bursty, burst_window(*active, *burst_start, *burst_len, t))
        }
        BurstProfile::Moderate { active: false, .. } => frame_log(&clean, &[], None),
        BurstProfile::Moderate { active: true, burst_len } => {
            let bursty: Vec<f64> =
                received.iter().map(|x| log_symbol_mixture(*x, burst_var)).collect();
            marginal_over_start(*burst_len, &bursty)
        }
        BurstProfile::Least { burst_prob, burst_len } => {
            let lp_clear = frame_log(&clean, &[], None);
            if *burst_prob == 0.0 {
                lp_clear
            } else {
                let bursty: Vec<f64> =
                    received.iter().map(|x| log_symbol_mixture(*x, burst_var)).collect();
                let lp_burst = marginal_over_start(*burst_len, &bursty);
                if *burst_prob == 1.0 {
                    lp_burst
                } else {
                    log_sum_exp(&[
                        (1.0 - burst_prob).ln() + lp_clear,
                        burst_prob.ln() + lp_burst,
                    ])
                }
            }
        }
    };
    if lp.is_nan() {
        return Err(PhyError::InvalidInput("log likelihood is NaN".into()));
    }
    Ok(lp)
}

/// Exact conditional density value `p(received | context)`.
pub fn likelihood(received: &[Complex64], context: &PhyContext) -> Result<f64> {
    Ok(log_likelihood(received, context)?.exp())
}

/// Exact covariate likelihood ratio
/// `p(received | test context) / p(received | calibration context)`,
/// evaluated in log space.
pub fn likelihood_ratio(
    received: &[Complex64],
    test: &PhyContext,
    calibration: &PhyContext,
) -> Result<f64> {
    let lp_te = log_likelihood(received, test)?;
    let lp_cal = log_likelihood(received, calibration)?;
    if lp_te == f64::NEG_INFINITY && lp_cal == f64::NEG_INFINITY {
        return Err(PhyError::InvalidInput(
            "both log densities underflowed to -inf".into(),
        ));
    }
    Ok((lp_te - lp_cal).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn ctx(burst: BurstProfile) -> PhyContext {
        PhyContext::new(burst, 1.0, -7.5).unwrap()
    }

    fn random_frame(len: usize, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
        (0..len)
            .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn inactive_most_reduces_to_pure_awgn_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = random_frame(8, &mut rng);
        let inactive = ctx(BurstProfile::Most { active: false, burst_len: 6, burst_start: 2 });
        let lp = log_likelihood(&x, &inactive).unwrap();
        let manual: f64 = x
            .iter()
            .map(|s| log_symbol_mixture(*s, inactive.noise_var()))
            .sum();
        assert_eq!(lp, manual);
    }

    #[test]
    fn most_level_factorizes_per_symbol() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x = random_frame(8, &mut rng);
        let c = ctx(BurstProfile::Most { active: true, burst_len: 3, burst_start: 4 });
        let lp = log_likelihood(&x, &c).unwrap();
        let manual: f64 = x
            .iter()
            .enumerate()
            .map(|(t, s)| {
                let var = if (4..7).contains(&t) {
                    c.noise_var() + c.interference_var()
                } else {
                    c.noise_var()
                };
                log_symbol_mixture(*s, var)
            })
            .sum();
        assert!((lp - manual).abs() < 1e-12);
    }

    #[test]
    fn zero_burst_probability_equals_inactive_burst_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = random_frame(8, &mut rng);
        let least = ctx(BurstProfile::Least { burst_prob: 0.0, burst_len: 4 });
        let most = ctx(BurstProfile::Most { active: false, burst_len: 4, burst_start: 0 });
        assert_eq!(
            log_likelihood(&x, &least).unwrap(),
            log_likelihood(&x, &most).unwrap()
        );
    }

    /// Brute-force oracle for a 2-symbol frame: enumerate every
    /// (symbol pair, burst occurrence, burst start) combination and sum the
    /// exact joint densities. This follows the generative definition
    /// directly, with no per-symbol factorization.
    fn enumerate_likelihood_t2(x: &[Complex64], c: &PhyContext) -> f64 {
        let t = 2usize;
        let base = c.noise_var();
        let burst = base + c.interference_var();
        let gauss = |x: Complex64, s: Complex64, var: f64| {
            (-(x - s).norm_sqr() / var).exp() / (std::f64::consts::PI * var)
        };
        let (probs, burst_len): (Vec<(f64, Option<usize>)>, usize) = match &c.burst {
            BurstProfile::Least { burst_prob, burst_len } => {
                let mut cases = vec![(1.0 - burst_prob, None)];
                for start in 0..t {
                    cases.push((burst_prob / t as f64, Some(start)));
                }
                (cases, *burst_len)
            }
            BurstProfile::Moderate { active, burst_len } => {
                if *active {
                    ((0..t).map(|s| (1.0 / t as f64, Some(s))).collect(), *burst_len)
                } else {
                    (vec![(1.0, None)], *burst_len)
                }
            }
            BurstProfile::Most { active, burst_len, burst_start } => {
                if *active {
                    (vec![(1.0, Some(*burst_start))], *burst_len)
                } else {
                    (vec![(1.0, None)], *burst_len)
                }
            }
        };
        let mut total = 0.0;
        for (p_case, start) in probs {
            if p_case == 0.0 {
                continue;
            }
            let window = start.and_then(|s| burst_window(true, s, burst_len, t));
            for s0 in CONSTELLATION {
                for s1 in CONSTELLATION {
                    let var_at = |idx: usize| match window {
                        Some((lo, hi)) if idx >= lo && idx < hi => burst,
                        _ => base,
                    };
                    total += p_case
                        * (1.0 / 16.0)
                        * gauss(x[0], s0, var_at(0))
                        * gauss(x[1], s1, var_at(1));
                }
            }
        }
        total
    }

    #[test]
    fn two_symbol_enumeration_oracle_agrees() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let cases = [
            BurstProfile::Most { active: true, burst_len: 1, burst_start: 1 },
            BurstProfile::Most { active: false, burst_len: 1, burst_start: 0 },
            BurstProfile::Moderate { active: true, burst_len: 1 },
            BurstProfile::Least { burst_prob: 0.4, burst_len: 1 },
            BurstProfile::Least { burst_prob: 1.0, burst_len: 2 },
        ];
        for burst in cases {
            let c = ctx(burst);
            for _ in 0..10 {
                let x = random_frame(2, &mut rng);
                let direct = likelihood(&x, &c).unwrap();
                let oracle = enumerate_likelihood_t2(&x, &c);
                assert!(
                    (direct - oracle).abs() / oracle < 1e-9,
                    "{direct} vs oracle {oracle} for {:?}",
                    c.burst
                );
            }
        }
    }

    #[test]
    fn vanishing_interference_erases_the_burst_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let x = random_frame(8, &mut rng);
        let variants = [
            BurstProfile::Most { active: true, burst_len: 6, burst_start: 0 },
            BurstProfile::Most { active: true, burst_len: 2, burst_start: 4 },
            BurstProfile::Most { active: false, burst_len: 0, burst_start: 0 },
            BurstProfile::Moderate { active: true, burst_len: 5 },
        ];
        let reference = log_likelihood(
            &x,
            &PhyContext::new(variants[2].clone(), 1.0, -600.0).unwrap(),
        )
        .unwrap();
        for burst in variants {
            let c = PhyContext::new(burst, 1.0, -600.0).unwrap();
            let lp = log_likelihood(&x, &c).unwrap();
            assert!(
                (lp - reference).abs() < 1e-12,
                "INR -> -inf should make burst parameters irrelevant"
            );
        }
    }

    #[test]
    fn ratio_is_one_for_matched_contexts_and_reciprocal_otherwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let x = random_frame(8, &mut rng);
        let a = ctx(BurstProfile::Most { active: true, burst_len: 6, burst_start: 0 });
        let b = ctx(BurstProfile::Most { active: false, burst_len: 6, burst_start: 0 });
        assert_eq!(likelihood_ratio(&x, &a, &a).unwrap(), 1.0);
        let fwd = likelihood_ratio(&x, &a, &b).unwrap();
        let bwd = likelihood_ratio(&x, &b, &a).unwrap();
        assert!((fwd * bwd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_symbol_ratio_matches_enumeration_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let te = ctx(BurstProfile::Least { burst_prob: 0.8, burst_len: 1 });
        let cal = ctx(BurstProfile::Least { burst_prob: 0.2, burst_len: 1 });
        for _ in 0..10 {
            let x = random_frame(2, &mut rng);
            let direct = likelihood_ratio(&x, &te, &cal).unwrap();
            let oracle = enumerate_likelihood_t2(&x, &te) / enumerate_likelihood_t2(&x, &cal);
            assert!(
                (direct - oracle).abs() / oracle < 1e-9,
                "ratio {direct} vs oracle {oracle}"
            );
        }
    }
}
