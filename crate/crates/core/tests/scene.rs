//! Scene filtering against per-degree and per-bin sampling oracles.

use std::collections::BTreeSet;

use autotour::geo::AngularInterval as Iv;
use autotour::osm::{build_geo_features, parse_overpass, unify, FeatureCategory, GeoFeature, LineWidths};
use autotour::scene::{fov_filter, occlusion_filter, sort_left_to_right, summarize_nearby, visible_features, CameraPose};
use autotour::{GeoPoint, LocalPoint, Polygon};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cam(heading: f64, fov: f64, margin: f64) -> CameraPose {
    CameraPose::with_fov(GeoPoint::new(22.3, 114.2).unwrap(), heading, fov, margin).unwrap()
}

fn feature(id: &str, cat: FeatureCategory, start: f64, span: f64, dist: f64) -> GeoFeature {
    let sq = Polygon::new(vec![
        LocalPoint::new(0.0, dist),
        LocalPoint::new(1.0, dist),
        LocalPoint::new(1.0, dist + 1.0),
        LocalPoint::new(0.0, dist + 1.0),
    ])
    .unwrap();
    let mut f = GeoFeature::from_footprint(id, Some(id.to_string()), cat, vec![sq]);
    f.angular_interval = Iv::from_start_span(start, span).unwrap();
    f.distance_m = dist;
    f
}

fn covers(start: f64, span: f64, b: f64) -> bool {
    (b - start).rem_euclid(360.0) <= span + 1e-9
}

fn ids(v: &[GeoFeature]) -> Vec<String> {
    v.iter().map(|f| f.id.clone()).collect()
}

#[test]
fn fov_matches_degree_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let heading = rng.random_range(0..360) as f64;
        let fov = (rng.random_range(10..=60) * 2) as f64;
        let margin = rng.random_range(0..=20) as f64;
        let c = cam(heading, fov, margin);
        let feats: Vec<GeoFeature> = (0..500)
            .map(|i| {
                let start = rng.random_range(0..360) as f64;
                let span = rng.random_range(1..=90) as f64;
                feature(&format!("f{i}"), FeatureCategory::Building, start, span, 10.0)
            })
            .collect();
        let half = fov / 2.0 + margin;
        let w_start = heading - half;
        let kept = fov_filter(&feats, &c);
        let want: Vec<String> = feats
            .iter()
            .filter(|f| {
                let (s, sp) = (f.angular_interval.start, f.angular_interval.span());
                // Integer endpoints: half-degree samples see every overlap.
                (0..720).any(|k| {
                    let b = k as f64 / 2.0;
                    covers(s, sp, b) && covers(w_start, 2.0 * half, b)
                })
            })
            .map(|f| f.id.clone())
            .collect();
        assert_eq!(ids(&kept), want);
    }
}

#[test]
fn fov_examples() {
    let c = cam(0.0, 70.0, 0.0);
    let east = feature("east", FeatureCategory::Building, 85.0, 10.0, 20.0);
    let north = feature("north", FeatureCategory::Building, 355.0, 10.0, 20.0);
    assert_eq!(ids(&fov_filter(&[east, north], &c)), vec!["north"]);
}

/// Independent 0.1° coverage check.
fn oracle_occluded(f: &GeoFeature, all: &[GeoFeature]) -> bool {
    if matches!(f.category, FeatureCategory::Park | FeatureCategory::Road | FeatureCategory::Waterway) {
        return false;
    }
    let (s, sp) = (f.angular_interval.start, f.angular_interval.span());
    let mut own = 0;
    let mut hidden = 0;
    for k in 0..3600 {
        let b = (k as f64 + 0.5) / 10.0;
        if !covers(s, sp, b) {
            continue;
        }
        own += 1;
        if all.iter().any(|o| {
            o.category == FeatureCategory::Building
                && o.distance_m < f.distance_m - 2.0
                && covers(o.angular_interval.start, o.angular_interval.span(), b)
        }) {
            hidden += 1;
        }
    }
    own > 0 && hidden as f64 >= 0.9 * own as f64
}

fn random_scene(rng: &mut impl Rng, n: usize) -> Vec<GeoFeature> {
    let cats = [
        FeatureCategory::Building,
        FeatureCategory::Building,
        FeatureCategory::Road,
        FeatureCategory::Park,
        FeatureCategory::Natural,
        FeatureCategory::Other,
    ];
    (0..n)
        .map(|i| {
            let start = rng.random_range(0.0..360.0);
            let span = rng.random_range(1.0..60.0);
            let d = rng.random_range(1.0..150.0);
            feature(&format!("f{i:03}"), cats[rng.random_range(0..cats.len())], start, span, d)
        })
        .collect()
}

#[test]
fn occlusion_matches_bin_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = cam(0.0, 70.0, 15.0);
    for _ in 0..30 {
        let feats = random_scene(&mut rng, 40);
        let kept = occlusion_filter(&feats, &c);
        let want: Vec<String> = feats.iter().filter(|f| !oracle_occluded(f, &feats)).map(|f| f.id.clone()).collect();
        assert_eq!(ids(&kept), want);
    }
}

#[test]
fn occlusion_examples() {
    let c = cam(0.0, 70.0, 15.0);
    let near = feature("near", FeatureCategory::Building, 350.0, 20.0, 10.0);
    let hidden = feature("hidden", FeatureCategory::Building, 355.0, 10.0, 40.0);
    let half = feature("half", FeatureCategory::Building, 0.0, 20.0, 40.0);
    let park = feature("park", FeatureCategory::Park, 355.0, 10.0, 40.0);
    assert_eq!(ids(&occlusion_filter(std::slice::from_ref(&near), &c)), vec!["near"]);
    assert_eq!(ids(&occlusion_filter(&[near.clone(), hidden], &c)), vec!["near"]);
    assert_eq!(ids(&occlusion_filter(&[near.clone(), half], &c)), vec!["near", "half"]);
    // Parks are never hidden; parks never hide.
    assert_eq!(ids(&occlusion_filter(&[near.clone(), park.clone()], &c)), vec!["near", "park"]);
    let behind_park = feature("b", FeatureCategory::Building, 355.0, 10.0, 80.0);
    assert_eq!(ids(&occlusion_filter(&[park, behind_park], &c)), vec!["park", "b"]);
    // Within the 2 m depth gap nothing is hidden.
    let close_behind = feature("cb", FeatureCategory::Building, 355.0, 10.0, 11.5);
    assert_eq!(ids(&occlusion_filter(&[near, close_behind], &c)), vec!["near", "cb"]);
}

#[test]
fn sort_examples() {
    let c = cam(10.0, 70.0, 15.0);
    let a = feature("a", FeatureCategory::Building, 325.0, 10.0, 20.0); // -40
    let b = feature("b", FeatureCategory::Building, 5.0, 10.0, 30.0); // 0
    let b2 = feature("b2", FeatureCategory::Building, 5.0, 10.0, 10.0); // 0, nearer
    let d = feature("d", FeatureCategory::Building, 35.0, 10.0, 20.0); // +30
    let input = vec![d.clone(), b.clone(), a.clone(), b2.clone()];
    let out = sort_left_to_right(&input, &c);
    assert_eq!(ids(&out), vec!["a", "b2", "b", "d"]);
    let mut rev = input;
    rev.reverse();
    assert_eq!(ids(&sort_left_to_right(&rev, &c)), ids(&out));
}

#[test]
fn nearby_examples() {
    let c = cam(0.0, 70.0, 15.0);
    let row: Vec<GeoFeature> = (0..3)
        .map(|i| {
            let mut f = feature(&format!("n{i}"), FeatureCategory::Building, 340.0 + 15.0 * i as f64, 10.0, 10.0);
            // Far apart so only adjacency counts.
            f.footprint = vec![Polygon::new(vec![
                LocalPoint::new(100.0 * i as f64, 0.0),
                LocalPoint::new(100.0 * i as f64 + 1.0, 0.0),
                LocalPoint::new(100.0 * i as f64 + 1.0, 1.0),
            ])
            .unwrap()];
            f
        })
        .collect();
    let out = summarize_nearby(&sort_left_to_right(&row, &c));
    assert_eq!(out[1].nearby_info, vec!["n0", "n2"]);
    assert_eq!(out[0].nearby_info, vec!["n1"]);
    assert!(summarize_nearby(&row[..1])[0].nearby_info.is_empty());
}

fn poly_dist(a: &Polygon, b: &Polygon) -> f64 {
    let inside = |p: LocalPoint, q: &Polygon| {
        let v = q.vertices();
        let mut c = false;
        for i in 0..v.len() {
            let (s, t) = (v[i], v[(i + v.len() - 1) % v.len()]);
            if (s.y > p.y) != (t.y > p.y) && p.x < (t.x - s.x) * (p.y - s.y) / (t.y - s.y) + s.x {
                c = !c;
            }
        }
        c
    };
    if a.vertices().iter().any(|&p| inside(p, b)) || b.vertices().iter().any(|&p| inside(p, a)) {
        return 0.0;
    }
    let orient = |p: LocalPoint, q: LocalPoint, r: LocalPoint| (q - p).cross(r - p);
    let edges = |x: &Polygon| {
        let v = x.vertices().to_vec();
        (0..v.len()).map(move |i| (v[i], v[(i + 1) % v.len()])).collect::<Vec<_>>()
    };
    for (p1, p2) in edges(a) {
        for &(q1, q2) in &edges(b) {
            let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
            let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return 0.0;
            }
        }
    }
    let seg = |p: LocalPoint, s: LocalPoint, t: LocalPoint| {
        let d = t - s;
        let l2 = d.dot(d);
        let u = if l2 == 0.0 { 0.0 } else { ((p - s).dot(d) / l2).clamp(0.0, 1.0) };
        (p - (s + d * u)).norm()
    };
    let one_way = |x: &Polygon, y: &Polygon| {
        let v = y.vertices();
        x.vertices()
            .iter()
            .flat_map(|&p| (0..v.len()).map(move |i| seg(p, v[i], v[(i + 1) % v.len()])))
            .fold(f64::INFINITY, f64::min)
    };
    one_way(a, b).min(one_way(b, a))
}

#[test]
fn nearby_matches_pairwise_oracle() {
    for scene in ["choi_hung", "campus_300m"] {
        let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(scene);
        let s: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("scene.json")).unwrap()).unwrap();
        let c = CameraPose::new(
            GeoPoint::new(s["lat"].as_f64().unwrap(), s["lon"].as_f64().unwrap()).unwrap(),
            s["heading_deg"].as_f64().unwrap(),
        )
        .unwrap();
        let (ways, _) = unify(&parse_overpass(&std::fs::read(dir.join("overpass.json")).unwrap()).unwrap().elements);
        let feats = build_geo_features(&ways, &c, &LineWidths::default());
        let vis = visible_features(&feats, &c);
        assert!(!vis.is_empty());
        for (i, f) in vis.iter().enumerate() {
            let mut want = BTreeSet::new();
            for (j, o) in vis.iter().enumerate() {
                let adjacent = j + 1 == i || i + 1 == j;
                let d = f
                    .footprint
                    .iter()
                    .flat_map(|a| o.footprint.iter().map(move |b| poly_dist(a, b)))
                    .fold(f64::INFINITY, f64::min);
                if j != i && (adjacent || d <= 25.0) && o.name.is_some() && o.name != f.name {
                    want.insert(o.name.clone().unwrap());
                }
            }
            let got: BTreeSet<String> = f.nearby_info.iter().cloned().collect();
            assert_eq!(got, want, "{scene} {}", f.id);
        }
    }
}

#[test]
fn choi_hung_visibility() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/choi_hung");
    let c = CameraPose::new(GeoPoint::new(22.3364, 114.2655).unwrap(), 0.0).unwrap();
    let (ways, _) = unify(&parse_overpass(&std::fs::read(dir.join("overpass.json")).unwrap()).unwrap().elements);
    let vis = visible_features(&build_geo_features(&ways, &c, &LineWidths::default()), &c);
    let v = ids(&vis);
    assert!(v.contains(&"way/101".to_string()) && v.contains(&"way/103".to_string()) && v.contains(&"way/104".to_string()));
    assert!(!v.contains(&"way/102".to_string()), "building behind Lok Wah Court is hidden");
}

fn scene_strategy() -> impl Strategy<Value = Vec<GeoFeature>> {
    prop::collection::vec((0.0..360.0f64, 1.0..90.0f64, 1.0..200.0f64, 0usize..4), 0..30).prop_map(|v| {
        let cats = [FeatureCategory::Building, FeatureCategory::Road, FeatureCategory::Park, FeatureCategory::Other];
        v.into_iter()
            .enumerate()
            .map(|(i, (s, sp, d, c))| feature(&format!("p{i:02}"), cats[c], s, sp, d))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filters_contractive_and_idempotent(feats in scene_strategy(), h in 0.0..360.0f64, fov in 20.0..120.0f64, m in 0.0..30.0f64) {
        let c = cam(h, fov, m);
        for f in [fov_filter as fn(&[GeoFeature], &CameraPose) -> Vec<GeoFeature>, occlusion_filter] {
            let once = f(&feats, &c);
            let all: BTreeSet<_> = ids(&feats).into_iter().collect();
            prop_assert!(ids(&once).iter().all(|i| all.contains(i)));
            prop_assert_eq!(ids(&f(&once, &c)), ids(&once));
        }
    }

    #[test]
    fn nearest_is_never_occluded(feats in scene_strategy()) {
        let c = cam(0.0, 70.0, 15.0);
        let kept: BTreeSet<_> = ids(&occlusion_filter(&feats, &c)).into_iter().collect();
        // Nearest among everything its interval touches: nothing can hide it.
        for f in &feats {
            let nearest = feats.iter().all(|o| {
                o.id == f.id || !o.angular_interval.intersects(&f.angular_interval) || o.distance_m >= f.distance_m
            });
            if nearest {
                prop_assert!(kept.contains(&f.id), "{}", f.id);
            }
        }
    }

    #[test]
    fn wider_margin_never_shrinks(feats in scene_strategy(), h in 0.0..360.0f64, m1 in 0.0..30.0f64, dm in 0.0..30.0f64) {
        let narrow: BTreeSet<_> = ids(&fov_filter(&feats, &cam(h, 70.0, m1))).into_iter().collect();
        let wide: BTreeSet<_> = ids(&fov_filter(&feats, &cam(h, 70.0, m1 + dm))).into_iter().collect();
        prop_assert!(narrow.is_subset(&wide));
    }

    #[test]
    fn sort_is_deterministic_permutation(feats in scene_strategy(), h in 0.0..360.0f64) {
        let c = cam(h, 70.0, 15.0);
        let out = sort_left_to_right(&feats, &c);
        let mut a = ids(&out);
        let mut b = ids(&feats);
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        let mut rev = feats.clone();
        rev.reverse();
        prop_assert_eq!(ids(&sort_left_to_right(&rev, &c)), ids(&out));
    }
}
