//! Matching against an exhaustive assignment oracle and geometric
//! invariances.

use std::collections::HashSet;

use autotour::matcher::{greedy_assign, match_feature, match_scene, overlap_ratio, score_matrix, sector_from_photo_feature, DEFAULT_THRESHOLD};
use autotour::osm::{FeatureCategory, GeoFeature};
use autotour::photo::PhotoFeature;
use autotour::scene::CameraPose;
use autotour::{GeoPoint, LocalPoint, Polygon};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cam(h: f64) -> CameraPose {
    CameraPose::new(GeoPoint::new(31.23, 121.47).unwrap(), h).unwrap()
}

fn pf(name: &str, span: (f64, f64), dist: (f64, f64)) -> PhotoFeature {
    PhotoFeature::new(name, span, format!("{name} seen"), dist, FeatureCategory::Building).unwrap()
}

fn rect(id: &str, cx: f64, cy: f64, w: f64, h: f64) -> GeoFeature {
    let p = Polygon::new(vec![
        LocalPoint::new(cx - w / 2.0, cy - h / 2.0),
        LocalPoint::new(cx + w / 2.0, cy - h / 2.0),
        LocalPoint::new(cx + w / 2.0, cy + h / 2.0),
        LocalPoint::new(cx - w / 2.0, cy + h / 2.0),
    ])
    .unwrap();
    GeoFeature::from_footprint(id, Some(id.into()), FeatureCategory::Building, vec![p])
}

fn transform(f: &GeoFeature, t: impl Fn(LocalPoint) -> LocalPoint + Copy) -> GeoFeature {
    let fp: Vec<Polygon> = f.footprint.iter().map(|p| p.map_points(t).unwrap()).collect();
    GeoFeature::from_footprint(f.id.clone(), f.name.clone(), f.category, fp)
}

fn random_scene(rng: &mut impl Rng, npf: usize, ngf: usize) -> (Vec<PhotoFeature>, Vec<GeoFeature>) {
    let pfs = (0..npf)
        .map(|i| {
            let l = rng.random_range(-60.0..40.0);
            let r = l + rng.random_range(5.0..40.0);
            let d0 = rng.random_range(0.0..40.0);
            pf(&format!("p{i}"), (l, r), (d0, d0 + rng.random_range(5.0..50.0)))
        })
        .collect();
    let gfs = (0..ngf)
        .map(|j| {
            let b: f64 = rng.random_range(-70.0..70.0);
            let d = rng.random_range(5.0..80.0);
            rect(
                &format!("g{j}"),
                d * b.to_radians().sin(),
                d * b.to_radians().cos(),
                rng.random_range(3.0..25.0),
                rng.random_range(3.0..25.0),
            )
        })
        .collect();
    (pfs, gfs)
}

/// Every injective partial assignment with cells ≥ τ; best is the one whose
/// descending score list is lexicographically largest.
fn brute_force(scores: &[Vec<Option<f64>>], tau: f64) -> Vec<Option<usize>> {
    let n = scores.len();
    let m = scores.first().map_or(0, Vec::len);
    let mut best: (Vec<f64>, Vec<Option<usize>>) = (Vec::new(), vec![None; n]);
    let mut cur = vec![None; n];
    fn rec(
        i: usize,
        scores: &[Vec<Option<f64>>],
        tau: f64,
        m: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        best: &mut (Vec<f64>, Vec<Option<usize>>),
    ) {
        if i == scores.len() {
            let mut v: Vec<f64> = cur.iter().enumerate().filter_map(|(i, c)| c.map(|j| scores[i][j].unwrap())).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            if v.partial_cmp(&best.0) == Some(std::cmp::Ordering::Greater) {
                *best = (v, cur.clone());
            }
            return;
        }
        cur[i] = None;
        rec(i + 1, scores, tau, m, used, cur, best);
        for j in 0..m {
            if used[j] || !scores[i][j].is_some_and(|s| s >= tau) {
                continue;
            }
            used[j] = true;
            cur[i] = Some(j);
            rec(i + 1, scores, tau, m, used, cur, best);
            used[j] = false;
        }
        cur[i] = None;
    }
    rec(0, scores, tau, m, &mut vec![false; m], &mut cur, &mut best);
    best.1
}

#[test]
fn greedy_equals_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let c = cam(0.0);
    let mut contested = 0;
    for _ in 0..60 {
        let (pfs, gfs) = random_scene(&mut rng, 5, 10);
        let scores = score_matrix(&pfs, &gfs, &c);
        let greedy = greedy_assign(&scores, &gfs, DEFAULT_THRESHOLD);
        assert_eq!(greedy, brute_force(&scores, DEFAULT_THRESHOLD));
        let results = match_scene(&pfs, &gfs, &c, DEFAULT_THRESHOLD);
        assert_eq!(results.iter().map(|r| r.matched_id().map(str::to_string)).collect::<Vec<_>>(),
            greedy.iter().map(|g| g.map(|j| gfs[j].id.clone())).collect::<Vec<_>>());
        // Count scenes where independent argmaxes would have collided.
        let argmax: Vec<_> = scores
            .iter()
            .filter_map(|row| {
                row.iter().enumerate().filter_map(|(j, s)| s.filter(|s| *s >= DEFAULT_THRESHOLD).map(|s| (j, s))).max_by(|a, b| a.1.total_cmp(&b.1)).map(|x| x.0)
            })
            .collect();
        if argmax.iter().collect::<HashSet<_>>().len() < argmax.len() {
            contested += 1;
        }
    }
    assert!(contested > 5, "oracle exercised on only {contested} contested scenes");
}

#[test]
fn conflict_rule() {
    let c = cam(0.0);
    // Wide sector sees the whole house; narrow one only part of it.
    let house = rect("house", 0.0, 30.0, 10.0, 10.0);
    let shed = rect("shed", 14.0, 30.0, 4.0, 4.0);
    let a = pf("a", (-30.0, 30.0), (10.0, 50.0));
    let b = pf("b", (-3.0, 40.0), (20.0, 45.0));
    let r = match_scene(&[b.clone(), a.clone()], &[house.clone(), shed.clone()], &c, DEFAULT_THRESHOLD);
    let sb = score_matrix(&[b], &[house], &c)[0][0].unwrap();
    assert!(sb < 1.0);
    assert_eq!(r[1].matched_id(), Some("house"));
    assert_eq!(r[0].matched_id(), Some("shed"));
}

#[test]
fn largest_relative_overlap_wins() {
    let c = cam(0.0);
    let p = pf("tower", (-15.0, 15.0), (30.0, 60.0));
    // 1: large block; most overlap in m² but a small share of its own area.
    let big = rect("f1", -25.0, 45.0, 60.0, 40.0);
    // 2: small building entirely inside the sector.
    let small = rect("f2", 0.0, 45.0, 8.0, 8.0);
    // 3: medium building mostly beyond the outer radius.
    let mid = rect("f3", 10.0, 65.0, 12.0, 16.0);
    let secs = sector_from_photo_feature(&c, &p);
    let (r1, a1) = overlap_ratio(&secs, &big).unwrap();
    let (r2, a2) = overlap_ratio(&secs, &small).unwrap();
    let (r3, _) = overlap_ratio(&secs, &mid).unwrap();
    assert!(a1 > a2, "big block has more absolute overlap");
    assert!(r2 > r1 && r2 > r3);
    let m = match_feature(&p, &[big, small, mid], &c, DEFAULT_THRESHOLD);
    assert_eq!(m.matched_id(), Some("f2"));
}

#[test]
fn partial_overlap_matches_sampling() {
    let c = cam(0.0);
    let p = pf("x", (-20.0, 10.0), (15.0, 40.0));
    let g = rect("g", 8.0, 30.0, 20.0, 14.0);
    let (r, a) = overlap_ratio(&sector_from_photo_feature(&c, &p), &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = 1000;
    let mut hits = 0;
    for i in 0..k {
        for j in 0..k {
            let x = -2.0 + 20.0 * (i as f64 + rng.random::<f64>()) / k as f64;
            let y = 23.0 + 14.0 * (j as f64 + rng.random::<f64>()) / k as f64;
            let rr = (x * x + y * y).sqrt();
            let b = x.atan2(y).to_degrees();
            if (15.0..=40.0).contains(&rr) && (-20.0..=10.0).contains(&b) {
                hits += 1;
            }
        }
    }
    let want = hits as f64 * 20.0 * 14.0 / (k * k) as f64;
    assert!((a - want).abs() <= 0.01 * want, "{a} vs {want}");
    assert!((r - want / 280.0).abs() <= 0.01 * r);
}

#[test]
fn wide_span_sums_both_halves() {
    let c = cam(0.0);
    let p = pf("wide", (-100.0, 100.0), (5.0, 30.0));
    assert_eq!(sector_from_photo_feature(&c, &p).len(), 2);
    let across = rect("across", 0.0, 15.0, 10.0, 6.0);
    let (r, _) = overlap_ratio(&sector_from_photo_feature(&c, &p), &across).unwrap();
    assert!((r - 1.0).abs() < 0.005);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_consistency(seed in any::<u64>(), k in 0.2..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pfs, gfs) = random_scene(&mut rng, 3, 6);
        let c = cam(0.0);
        let scaled_pfs: Vec<_> = pfs.iter().map(|p| {
            let mut q = p.clone();
            q.distance_range = (p.distance_range.0 * k, p.distance_range.1 * k);
            q
        }).collect();
        let scaled_gfs: Vec<_> = gfs.iter().map(|g| transform(g, |p| LocalPoint::new(p.x * k, p.y * k))).collect();
        let a = match_scene(&pfs, &gfs, &c, DEFAULT_THRESHOLD);
        let b = match_scene(&scaled_pfs, &scaled_gfs, &c, DEFAULT_THRESHOLD);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.r_norm - y.r_norm).abs() <= 0.005);
            prop_assert!((x.a_overlap * k * k - y.a_overlap).abs() <= 0.005 * y.a_overlap.max(1e-9) * 2.0 + 1e-9);
        }
        let sa = score_matrix(&pfs, &gfs, &c);
        let sb = score_matrix(&scaled_pfs, &scaled_gfs, &c);
        // Selections agree unless two candidates are within slack of each other.
        let clear = sa.iter().all(|row| {
            let mut v: Vec<f64> = row.iter().flatten().copied().collect();
            v.sort_by(|a, b| b.total_cmp(a));
            v.len() < 2 || v[0] - v[1] > 0.01 || v[0] < DEFAULT_THRESHOLD
        });
        if clear {
            prop_assert_eq!(greedy_assign(&sa, &gfs, DEFAULT_THRESHOLD), greedy_assign(&sb, &scaled_gfs, DEFAULT_THRESHOLD));
        }
    }

    #[test]
    fn rotation_consistency(seed in any::<u64>(), rot in 0.0..360.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pfs, gfs) = random_scene(&mut rng, 3, 6);
        let rotated: Vec<_> = gfs.iter().map(|g| transform(g, |p| p.rotate_bearing(rot))).collect();
        let a = match_scene(&pfs, &gfs, &cam(0.0), DEFAULT_THRESHOLD);
        let b = match_scene(&pfs, &rotated, &cam(rot % 360.0), DEFAULT_THRESHOLD);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.r_norm - y.r_norm).abs() <= 0.005, "{} vs {}", x.r_norm, y.r_norm);
        }
        let sa = score_matrix(&pfs, &gfs, &cam(0.0));
        let clear = sa.iter().all(|row| {
            let mut v: Vec<f64> = row.iter().flatten().copied().collect();
            v.sort_by(|a, b| b.total_cmp(a));
            v.len() < 2 || v[0] - v[1] > 0.01 || v[0] < DEFAULT_THRESHOLD
        });
        if clear {
            prop_assert_eq!(
                a.iter().map(|r| r.matched_id().map(str::to_string)).collect::<Vec<_>>(),
                b.iter().map(|r| r.matched_id().map(str::to_string)).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn result_invariants(seed in any::<u64>(), tau in 0.0..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pfs, gfs) = random_scene(&mut rng, 5, 8);
        let c = cam(0.0);
        let r = match_scene(&pfs, &gfs, &c, tau);
        prop_assert_eq!(r.len(), pfs.len());
        let mut seen = HashSet::new();
        for (m, p) in r.iter().zip(&pfs) {
            prop_assert_eq!(&m.photo_feature, p);
            match &m.matched {
                Some(g) => {
                    prop_assert!(seen.insert(g.id.clone()), "duplicate {}", g.id);
                    prop_assert!(m.r_norm >= tau);
                    prop_assert!(m.a_overlap <= g.area() + 1e-9);
                }
                None => {
                    prop_assert_eq!(m.r_norm, 0.0);
                    prop_assert_eq!(&m.photo_feature.description, &p.description);
                }
            }
        }
        prop_assert_eq!(&r, &match_scene(&pfs, &gfs, &c, tau));
    }
}
