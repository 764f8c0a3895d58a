mod common;

use common::{count_fnmr, eer_oracle, rejected_oracle, rng, surviving, threshold_oracle};
use rand::Rng;
use serfiq::dataset::{generate_pairs, QualityTable};
use serfiq::metrics::{compute_scores, eer, error_versus_reject, fmr, fnmr, ratio_grid, threshold_at_fmr, OperatingPoint, ScoreSet};
use serfiq::synth::{generate, SynthSpec};

fn random_scores(r: &mut impl Rng) -> Vec<f64> {
    let n = r.random_range(1..=200);
    let coarse = r.random_bool(0.5);
    (0..n)
        .map(|_| {
            let s: f64 = r.random_range(-1.0..1.0);
            if coarse {
                (s * 10.0).round() / 10.0
            } else {
                s
            }
        })
        .collect()
}

#[test]
fn thresholds_match_brute_force() {
    let mut r = rng(1);
    for _ in 0..100 {
        let imp = random_scores(&mut r);
        for target in [0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.9, r.random_range(0.001..0.999)] {
            let got = threshold_at_fmr(&imp, target).unwrap();
            let max = imp.iter().cloned().fold(f64::MIN, f64::max);
            match threshold_oracle(&imp, target) {
                Some(t) => assert_eq!(got.threshold, t, "target {target} on {imp:?}"),
                None => assert!(got.threshold > max && fmr(&imp, got.threshold).unwrap() == 0.0),
            }
            assert!(got.achieved_fmr <= target + 1e-12);
            assert_eq!(got.achieved_fmr, fmr(&imp, got.threshold).unwrap());
        }
    }
}

#[test]
fn fnmr_matches_counting() {
    let mut r = rng(2);
    for _ in 0..100 {
        let gen = random_scores(&mut r);
        for _ in 0..5 {
            let t = r.random_range(-1.1..1.1);
            assert_eq!(fnmr(&gen, t).unwrap(), count_fnmr(&gen, t) as f64 / gen.len() as f64);
        }
        // a score equal to the threshold is a match
        let t = gen[0];
        assert_eq!(fnmr(&gen, t).unwrap(), gen.iter().filter(|&&s| s < t).count() as f64 / gen.len() as f64);
    }
}

#[test]
fn eer_matches_brute_force() {
    let mut r = rng(3);
    for _ in 0..100 {
        let gen = random_scores(&mut r);
        let imp: Vec<f64> = random_scores(&mut r).into_iter().map(|s| s - 0.4).collect();
        let got = eer(&gen, &imp).unwrap();
        let (e, f, n) = eer_oracle(&gen, &imp);
        assert_eq!((got.eer, got.fmr, got.fnmr), (e, f, n));
        assert_eq!(fmr(&imp, got.threshold).unwrap(), f);
        assert_eq!(fnmr(&gen, got.threshold).unwrap(), n);
    }
}

#[test]
fn worked_examples() {
    assert_eq!(eer(&[0.9, 0.6, 0.4], &[0.5, 0.3, 0.1]).unwrap().eer, 1.0 / 3.0);
    assert_eq!(eer(&[0.9, 0.8, 0.7], &[0.2, 0.1]).unwrap().eer, 0.0);
    assert_eq!(eer(&[0.3], &[0.2, 0.25, -1.0]).unwrap().eer, 0.0);
}

fn protocol(seed: u64) -> (ScoreSet<f64>, Vec<String>) {
    let spec = SynthSpec {
        n_identities: 8,
        images_per_identity: 6,
        dim: 6,
        noise_high: 0.8,
        prototype_seed: seed,
        noise_seed: seed + 1,
        ..SynthSpec::default()
    };
    let (ds, _) = generate::<f64>(&spec).unwrap();
    let p = generate_pairs(&ds, 300, seed).unwrap();
    let ids = ds.records().iter().map(|r| r.image_id.clone()).collect();
    (compute_scores(&ds, &p).unwrap(), ids)
}

fn random_qualities(ids: &[String], seed: u64) -> QualityTable<f64> {
    let mut r = rng(seed);
    // coarse values so that ties are common
    ids.iter().map(|id| (id.clone(), r.random_range(0..12) as f64 / 12.0)).collect()
}

#[test]
fn erc_points_match_recount() {
    for seed in 0..6 {
        let (scores, ids) = protocol(seed);
        let q = random_qualities(&ids, seed + 50);
        let ratios = ratio_grid(0.05, 0.9);
        let t_full = threshold_at_fmr(&scores.impostor_scores(), 0.05).unwrap().threshold;
        let fnmr_curve = error_versus_reject(&scores, &q, &ratios, OperatingPoint::FnmrAtFmr(0.05)).unwrap();
        let eer_curve = error_versus_reject(&scores, &q, &ratios, OperatingPoint::Eer).unwrap();

        for (k, &ratio) in ratios.iter().enumerate() {
            let rejected = rejected_oracle(&scores, &q, k, 20);
            let g = surviving(&scores.genuine, &rejected);
            let i = surviving(&scores.impostor, &rejected);
            let fp = fnmr_curve.points.iter().find(|p| p.ratio == ratio);
            let ep = eer_curve.points.iter().find(|p| p.ratio == ratio);
            if g.is_empty() {
                assert!(fp.is_none());
            } else {
                let fp = fp.unwrap();
                assert_eq!((fp.rejected_images, fp.surviving_genuine, fp.surviving_impostor), (rejected.len(), g.len(), i.len()));
                assert_eq!(fp.error, count_fnmr(&g, t_full) as f64 / g.len() as f64);
            }
            if g.is_empty() || i.is_empty() {
                assert!(ep.is_none());
            } else {
                let ep = ep.unwrap();
                assert_eq!(ep.error, eer_oracle(&g, &i).0);
                assert_eq!((ep.surviving_genuine, ep.surviving_impostor), (g.len(), i.len()));
            }
        }
    }
}

#[test]
fn zero_ratio_is_full_set_error() {
    let (scores, ids) = protocol(9);
    let q = random_qualities(&ids, 1);
    let g = scores.genuine_scores();
    let i = scores.impostor_scores();
    let c = error_versus_reject(&scores, &q, &[0.0], OperatingPoint::FnmrAtFmr(0.01)).unwrap();
    assert_eq!(c.points.len(), 1);
    assert_eq!(c.points[0].error, fnmr(&g, threshold_at_fmr(&i, 0.01).unwrap().threshold).unwrap());
    let c = error_versus_reject(&scores, &q, &[0.0], OperatingPoint::Eer).unwrap();
    assert_eq!(c.points[0].error, eer(&g, &i).unwrap().eer);
}

#[test]
fn monotone_transforms_leave_curves_unchanged() {
    let (scores, ids) = protocol(4);
    let mut r = rng(8);
    // distinct values on a grid so the transforms cannot merge neighbours
    let mut levels: Vec<usize> = (0..1000).collect();
    let q: QualityTable<f64> = ids
        .iter()
        .map(|id| {
            let k = levels.swap_remove(r.random_range(0..levels.len()));
            (id.clone(), k as f64 / 1000.0)
        })
        .collect();
    let transforms: [fn(f64) -> f64; 3] = [|x| x * x * x, |x| (3.0 * x).exp() - 10.0, |x| (5.0 * x).atan()];
    for op in [OperatingPoint::Eer, OperatingPoint::FnmrAtFmr(0.01), OperatingPoint::FnmrAtFmr(0.1)] {
        let base = error_versus_reject(&scores, &q, &ratio_grid(0.05, 0.9), op).unwrap();
        for f in transforms {
            let tq: QualityTable<f64> = q.iter().map(|(k, v)| (k.to_string(), f(v))).collect();
            assert_eq!(error_versus_reject(&scores, &tq, &ratio_grid(0.05, 0.9), op).unwrap(), base);
        }
    }
}
