mod common;

use common::*;
use constellation_map::constellation::power_scale;
use constellation_map::soft::soft_weights;
use constellation_map::*;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    -5.0f64..5.0
}

fn levels16() -> LevelSet {
    LevelSet::uniform(4, -2.0, 2.0).unwrap()
}

/// Convex hull by monotone chain, counter-clockwise.
fn hull(points: &[ComplexPoint]) -> Vec<ComplexPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let cross = |o: ComplexPoint, a: ComplexPoint, b: ComplexPoint| {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let mut lower: Vec<ComplexPoint> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<ComplexPoint> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn inside_hull(h: &[ComplexPoint], p: ComplexPoint, tol: f64) -> bool {
    (0..h.len()).all(|i| {
        let (a, b) = (h[i], h[(i + 1) % h.len()]);
        let len = a.dist(b);
        ((b.re - a.re) * (p.im - a.im) - (b.im - a.im) * (p.re - a.re)) / len >= -tol
    })
}

proptest! {
    #[test]
    fn qam_map_is_idempotent_and_on_grid(re in finite(), im in finite()) {
        let l = levels16();
        let q = qam_map(ComplexPoint::new(re, im), &l, &l);
        prop_assert_eq!(qam_map(q, &l, &l), q);
        prop_assert!(l.values().contains(&q.re) && l.values().contains(&q.im));
    }

    #[test]
    fn pairing_round_trips(v in prop::collection::vec(finite(), 0..40)) {
        let even = &v[..v.len() / 2 * 2];
        prop_assert_eq!(complex_to_pair(&pair_to_complex(even).unwrap()), even.to_vec());
    }

    #[test]
    fn power_normalize_meets_budget(
        v in prop::collection::vec(-100.0f64..100.0, 1..64),
        power in 0.01f64..100.0,
    ) {
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let (z, scale) = power_normalize(&v, power).unwrap();
        let ms = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
        prop_assert!((ms - power).abs() <= 1e-12 * power);
        prop_assert_eq!(scale, power_scale(&v, power).unwrap());
    }

    #[test]
    fn uniform_levels_are_evenly_spaced(count in 2usize..80, span in 0.1f64..20.0, offset in 0.0f64..1.0) {
        // ranges whose endpoints are no larger than the span, e.g. [-2, 2]
        let lo = -offset * span;
        let l = make_uniform_levels(count, lo, lo + span).unwrap();
        let gaps: Vec<f64> = l.values().windows(2).map(|w| w[1] - w[0]).collect();
        let max = gaps.iter().cloned().fold(f64::MIN, f64::max);
        let min = gaps.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(max - min <= 1e-15 * span, "spread {}", max - min);
        prop_assert_eq!(l.values()[0], lo);
        prop_assert_eq!(*l.values().last().unwrap(), lo + span);
    }

    #[test]
    fn mrc_forward_is_monotone_and_closed(seed in 0u64..1000, m in 2usize..12) {
        let mut s = stream(seed);
        let levels = LevelSet::uniform(m, -2.0, 2.0).unwrap();
        let d = BoundarySet::new(interleaved_boundaries(&mut s, &levels), 20.0).unwrap();
        let mut xs: Vec<f64> = (0..200).map(|_| uniform(&mut s, -2.0, 2.0)).collect();
        xs.sort_by(f64::total_cmp);
        let out: Vec<f64> = xs.iter().map(|&x| mrc_forward(x, &d, &levels).0).collect();
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(out.iter().all(|v| levels.values().contains(v)));
    }

    #[test]
    fn mrc_backward_value_stays_in_level_range(x in -2.0f64..2.0, seed in 0u64..500) {
        let mut s = stream(seed);
        let levels = levels16();
        let d = BoundarySet::new(interleaved_boundaries(&mut s, &levels), 20.0).unwrap();
        let v = mrc_backward_value(x, &d, &levels);
        prop_assert!((-2.0 - 1e-12..=2.0 + 1e-12).contains(&v));
    }

    #[test]
    fn mic_value_ignores_point_order(re in -2.0f64..2.0, im in -2.0f64..2.0, seed in 0u64..500) {
        let mut s = stream(seed);
        let pts: Vec<ComplexPoint> = (0..16)
            .map(|_| ComplexPoint::new(uniform(&mut s, -2.0, 2.0), uniform(&mut s, -2.0, 2.0)))
            .collect();
        let mut shuffled = pts.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, s.below(i as u64 + 1) as usize);
        }
        let p = ComplexPoint::new(re, im);
        let mut r: Vec<f64> = pts.iter().map(|c| c.dist_sq(p)).collect();
        r.sort_by(f64::total_cmp);
        prop_assume!(r[0] < r[1]);
        let a = MicParams::new(Constellation::new(pts).unwrap(), 20.0).unwrap();
        let b = MicParams::new(Constellation::new(shuffled).unwrap(), 20.0).unwrap();
        prop_assert_eq!(mic_forward(p, &a).0, mic_forward(p, &b).0);
    }

    #[test]
    fn soft_weights_are_a_distribution(
        r in prop::collection::vec(0.0f64..10.0, 1..64),
        delta in 0.1f64..500.0,
    ) {
        let w = soft_weights(&r, delta);
        let total: f64 = w.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn mic_backward_value_in_convex_hull(re in -2.0f64..2.0, im in -2.0f64..2.0, seed in 0u64..500, delta in 1.0f64..200.0) {
        let mut s = stream(seed);
        let pts: Vec<ComplexPoint> = (0..8)
            .map(|_| ComplexPoint::new(uniform(&mut s, -2.0, 2.0), uniform(&mut s, -2.0, 2.0)))
            .collect();
        let h = hull(&pts);
        let mic = MicParams::new(Constellation::new(pts).unwrap(), delta).unwrap();
        let v = mic_backward_value(ComplexPoint::new(re, im), &mic);
        prop_assert!(inside_hull(&h, v, 1e-12));
    }

    #[test]
    fn mic_tracks_brute_force(re in -3.0f64..3.0, im in -3.0f64..3.0, seed in 0u64..500) {
        let mut s = stream(seed);
        let pts: Vec<ComplexPoint> = (0..10)
            .map(|_| ComplexPoint::new(uniform(&mut s, -2.0, 2.0), uniform(&mut s, -2.0, 2.0)))
            .collect();
        let mic = MicParams::new(Constellation::new(pts.clone()).unwrap(), 20.0).unwrap();
        let p = ComplexPoint::new(re, im).clipped(-2.0, 2.0);
        prop_assert_eq!(mic_forward(p, &mic).1, brute_nearest(p, &pts));
    }
}

#[test]
fn weights_converge_to_hard_choice() {
    let r = [0.3, 0.1, 0.5];
    let mut prev = 0.0;
    for delta in [1.0, 10.0, 100.0, 1000.0] {
        let w = soft_weights(&r, delta);
        assert!(w[1] > prev);
        prev = w[1];
    }
    assert!(1.0 - prev < 1e-80);
}
