//! Property tests for the template, transformation and encryption layers.

use amsobe_core::bbe::{self, PreprocessOutcome, PreprocessParams};
use amsobe_core::pairing::{BilinearGroup, TransparentGroup};
use amsobe_core::sot;
use amsobe_core::template::{
    biological_distance, extend_identification, extend_reference, quantize, FeatureTemplate,
    TemplateRole,
};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn template_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..=max_len)
}

proptest! {
    #[test]
    fn linearization_identity_holds(x in template_values(64), seed in any::<u64>()) {
        // Same-length y derived from x plus bounded noise.
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                (v + amsobe_core::random::uniform_in(&mut rng, -0.5, 0.5)).clamp(-1.0, 1.0)
            })
            .collect();
        let d = biological_distance(&x, &y).unwrap();
        let ip: f64 = extend_reference(&x)
            .iter()
            .zip(extend_identification(&y))
            .map(|(a, b)| a * b)
            .sum();
        prop_assert!((d - ip).abs() <= 1e-9 * (1.0 + d.abs()), "D={d} ip={ip}");
    }

    #[test]
    fn extensions_have_length_n_plus_two(x in template_values(128)) {
        prop_assert_eq!(extend_reference(&x).len(), x.len() + 2);
        prop_assert_eq!(extend_identification(&x).len(), x.len() + 2);
    }

    #[test]
    fn quantize_round_trips_within_half_step(
        x in template_values(32),
        scale_log in 0u32..20,
    ) {
        let scale = 1u64 << scale_log;
        let prime = BigUint::from(18_446_744_073_709_551_557u64);
        let t = FeatureTemplate::new(x.clone(), TemplateRole::Reference).unwrap();
        let q = quantize(&t, scale, &prime).unwrap();
        let back = q.dequantize();
        for (orig, rec) in x.iter().zip(back) {
            prop_assert!((orig - rec).abs() <= 0.5 / scale as f64 + 1e-15);
        }
    }

    #[test]
    fn sot_score_matches_distance_identity(
        x in template_values(64),
        seed in any::<u64>(),
        m in 1usize..=5,
    ) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = x.len();
        let key = sot::keygen(n, m, &mut rng).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|_| amsobe_core::random::uniform_in(&mut rng, -1.0, 1.0))
            .collect();
        let alpha_r = amsobe_core::random::uniform_in(&mut rng, 0.5, 2.0);
        let alpha_s = amsobe_core::random::uniform_in(&mut rng, 0.5, 2.0);
        let r = sot::encrypt_reference_with_alpha(
            &key,
            &FeatureTemplate::new(x.clone(), TemplateRole::Reference).unwrap(),
            alpha_r,
        )
        .unwrap();
        let s = sot::encrypt_identification_with_alpha(
            &key,
            &FeatureTemplate::new(y.clone(), TemplateRole::Identification).unwrap(),
            alpha_s,
        )
        .unwrap();
        let score = sot::match_score(&r, &s).unwrap();
        let expected =
            alpha_r * alpha_s * (biological_distance(&x, &y).unwrap() + key.threshold_sum());
        prop_assert!(
            (score - expected).abs() <= 1e-8 * (1.0 + score.abs()),
            "score {score} expected {expected}"
        );
    }

    #[test]
    fn sot_decision_equals_plaintext_rule(
        x in template_values(24),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = x.len();
        let m = 1 + amsobe_core::random::usize_below(&mut rng, 5);
        let key = sot::keygen(n, m, &mut rng).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|_| amsobe_core::random::uniform_in(&mut rng, -1.0, 1.0))
            .collect();
        let d = biological_distance(&x, &y).unwrap();
        let margin = d + key.threshold_sum();
        let r = sot::encrypt_reference(
            &key,
            &FeatureTemplate::new(x.clone(), TemplateRole::Reference).unwrap(),
            &mut rng,
        )
        .unwrap();
        let s = sot::encrypt_identification(
            &key,
            &FeatureTemplate::new(y, TemplateRole::Identification).unwrap(),
            &mut rng,
        )
        .unwrap();
        let encrypted = sot::decide(sot::match_score(&r, &s).unwrap()).unwrap();
        let plaintext = if margin <= 0.0 {
            sot::Decision::Match
        } else {
            sot::Decision::NoMatch
        };
        // Disagreement is tolerated only inside the numerical band around
        // the threshold.
        if margin.abs() >= 1e-7 {
            prop_assert_eq!(encrypted, plaintext, "margin {}", margin);
        }
    }

    #[test]
    fn preprocess_accept_branch_is_exactly_orthogonal(
        x in template_values(24),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let prime = BigUint::from(18_446_744_073_709_551_557u64);
        let probe: Vec<f64> = x
            .iter()
            .map(|v| (v + amsobe_core::random::uniform_in(&mut rng, -0.05, 0.05)).clamp(-1.0, 1.0))
            .collect();
        let d = biological_distance(&x, &probe).unwrap();
        let params = PreprocessParams {
            a: amsobe_core::random::uniform_in(&mut rng, 0.5, 2.0),
            b: -(d + amsobe_core::random::uniform_in(&mut rng, 0.1, 1.0)),
            scale: 1 << 16,
        };
        let params = PreprocessParams {
            b: params.b / params.a,
            ..params
        };
        let w = FeatureTemplate::new(x, TemplateRole::Reference).unwrap();
        let z = FeatureTemplate::new(probe, TemplateRole::Identification).unwrap();
        match bbe::preprocess(&w, &z, &params, &prime).unwrap() {
            PreprocessOutcome::Accepted {
                reference,
                identification,
            } => {
                let ip = reference
                    .values()
                    .iter()
                    .zip(identification.values())
                    .fold(BigUint::ZERO, |acc, (a, b)| (acc + a * b) % &prime);
                prop_assert_eq!(ip, BigUint::ZERO);
            }
            PreprocessOutcome::Rejected => {
                prop_assert!(false, "threshold was calibrated to accept");
            }
        }
    }

    #[test]
    fn bbe_round_trip_on_preprocessed_pairs(
        x in template_values(12),
        seed in any::<u64>(),
    ) {
        let group = TransparentGroup::default_64bit();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let probe: Vec<f64> = x
            .iter()
            .map(|v| (v + amsobe_core::random::uniform_in(&mut rng, -0.01, 0.01)).clamp(-1.0, 1.0))
            .collect();
        let w = FeatureTemplate::new(x, TemplateRole::Reference).unwrap();
        let z = FeatureTemplate::new(probe, TemplateRole::Identification).unwrap();
        let outcome =
            bbe::preprocess(&w, &z, &PreprocessParams::default(), group.order()).unwrap();
        let (wq, zq) = match outcome {
            PreprocessOutcome::Accepted {
                reference,
                identification,
            } => (reference, identification),
            PreprocessOutcome::Rejected => {
                return Ok(()); // default threshold can reject large noise; not under test
            }
        };
        let (pp, msk) = bbe::setup(&group, &wq, &mut rng).unwrap();
        let sk = bbe::keygen(&group, &msk, &zq, &mut rng).unwrap();
        let message = group.gt_exp(&amsobe_core::random::biguint_below(&mut rng, group.order()));
        let ct = bbe::encrypt(&group, &pp, &message, &mut rng);
        prop_assert_eq!(bbe::decrypt(&group, &sk, &ct, &zq).unwrap(), message);
    }

    #[test]
    fn sealed_bytes_round_trip(payload in prop::collection::vec(any::<u8>(), 0..512)) {
        let group = TransparentGroup::default_64bit();
        let mut rng = ChaCha12Rng::seed_from_u64(0xAB);
        let w = FeatureTemplate::new(vec![0.2, -0.4, 0.6], TemplateRole::Reference).unwrap();
        let z = w.with_role(TemplateRole::Identification);
        let (wq, zq) = match bbe::preprocess(&w, &z, &PreprocessParams::default(), group.order())
            .unwrap()
        {
            PreprocessOutcome::Accepted {
                reference,
                identification,
            } => (reference, identification),
            PreprocessOutcome::Rejected => unreachable!("identical templates always accept"),
        };
        let (pp, msk) = bbe::setup(&group, &wq, &mut rng).unwrap();
        let sk = bbe::keygen(&group, &msk, &zq, &mut rng).unwrap();
        let sealed = bbe::seal_bytes(&group, &pp, &payload, &mut rng).unwrap();
        let opened = bbe::open_bytes(&group, &sk, &sealed, &zq).unwrap();
        prop_assert_eq!(opened, payload);
    }
}

#[test]
fn bbe_exhaustive_round_trip_tiny_field() {
    // Every (r, s, t, β, message) tuple over Z_5 with ⟨(1,2),(2,4)⟩ = 10 ≡ 0.
    let group = TransparentGroup::new(BigUint::from(5u8)).unwrap();
    let big = |x: u64| BigUint::from(x);
    let w = amsobe_core::template::QuantizedTemplate::from_residues(
        vec![big(1), big(2)],
        1,
        big(5),
    )
    .unwrap();
    let z = amsobe_core::template::QuantizedTemplate::from_residues(
        vec![big(2), big(4)],
        1,
        big(5),
    )
    .unwrap();
    let alpha = vec![big(3), big(1)];
    for beta in 0u64..5 {
        let msk = bbe::BbeMasterKey {
            alpha: alpha.clone(),
            beta: big(beta),
        };
        let pp = bbe::BbePublicParams::<TransparentGroup> {
            template_points: w.values().iter().map(|v| group.g_exp(v)).collect(),
            alpha_points: alpha.iter().map(|v| group.g_exp(v)).collect(),
            mask: group.gt_exp(&big(beta)),
        };
        for t in 0u64..5 {
            let sk = bbe::keygen_with_randomness(&group, &msk, &z, &big(t)).unwrap();
            for r in 0u64..5 {
                for s in 0u64..5 {
                    for msg in 0u64..5 {
                        let message = group.gt_exp(&big(msg));
                        let ct =
                            bbe::encrypt_with_randomness(&group, &pp, &message, &big(r), &big(s));
                        assert_eq!(
                            bbe::decrypt(&group, &sk, &ct, &z).unwrap(),
                            message,
                            "β={beta} t={t} r={r} s={s} m={msg}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn sot_ciphertext_lengths_are_n_plus_two_plus_m() {
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for (n, m) in [(4usize, 1usize), (10, 3), (7, 5)] {
        let key = sot::keygen(n, m, &mut rng).unwrap();
        let t = FeatureTemplate::new(vec![0.1; n], TemplateRole::Reference).unwrap();
        let enc = sot::encrypt_reference(&key, &t, &mut rng).unwrap();
        assert_eq!(enc.len(), n + 2 + m);
    }
}
