use frameseg::timeline::{clip_query_times, neighbor_indices, Timeline};
use proptest::prelude::*;

#[test]
fn sample_indices_examples() {
    let tl = Timeline::new(150.0, 30.0, 25).unwrap();
    let want: Vec<usize> = (0..25).map(|i| 90 + 180 * i).collect();
    assert_eq!(tl.sample_indices(), want);
    assert_eq!(Timeline::new(150.0, 30.0, 1).unwrap().sample_indices(), vec![2250]);
    assert_eq!(Timeline::new(10.0, 2.0, 4).unwrap().sample_indices(), vec![2, 7, 12, 17]);
}

#[test]
fn window_examples() {
    let w = Timeline::uniform(150.0, 25).unwrap().frame_windows();
    assert_eq!(w[0], (0.0, 6.0));
    assert_eq!(w[24], (144.0, 150.0));
    assert_eq!(
        Timeline::uniform(10.0, 4).unwrap().frame_windows(),
        vec![(0.0, 2.5), (2.5, 5.0), (5.0, 7.5), (7.5, 10.0)]
    );
    let w = Timeline::uniform(7.0, 3).unwrap().frame_windows();
    assert_eq!(w, vec![(0.0, 7.0 / 3.0), (7.0 / 3.0, 14.0 / 3.0), (14.0 / 3.0, 7.0)]);
}

#[test]
fn neighbours() {
    assert_eq!(neighbor_indices(90, 3, 4500), (87, 93));
    assert_eq!(neighbor_indices(1, 3, 4500), (0, 4));
    assert_eq!(neighbor_indices(4499, 3, 4500), (4496, 4499));
}

#[test]
fn interpolation_examples() {
    let tl = Timeline::uniform(12.0, 2).unwrap();
    let got = tl.interpolate_scores(&[0.0, 1.0], &[1.0, 3.0, 5.0, 7.0, 9.0, 11.0]).unwrap();
    let want = [0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{got:?}");
    }
    let one = Timeline::uniform(12.0, 1).unwrap();
    assert_eq!(one.interpolate_scores(&[0.4], &[0.0, 6.0, 12.0]).unwrap(), vec![0.4; 3]);
    assert!(tl.interpolate_scores(&[], &[1.0]).is_err());
}

#[test]
fn clip_centres() {
    let c = clip_query_times(150.0, 2.0).unwrap();
    assert_eq!(c.len(), 75);
    assert_eq!(c[0], 1.0);
    assert_eq!(c[74], 149.0);
    assert_eq!(clip_query_times(5.0, 2.0).unwrap(), vec![1.0, 3.0, 4.5]);
    assert_eq!(clip_query_times(2.0, 2.0).unwrap(), vec![1.0]);
}

#[test]
fn rejects_degenerate_timelines() {
    assert!(Timeline::uniform(0.0, 3).is_err());
    assert!(Timeline::uniform(10.0, 0).is_err());
    assert!(Timeline::new(10.0, 0.0, 3).is_err());
    assert!(Timeline::uniform(f64::NAN, 3).is_err());
}

proptest! {
    #[test]
    fn windows_partition_and_hold_centres(duration in 0.5f64..500.0, f in 1usize..64) {
        let tl = Timeline::uniform(duration, f).unwrap();
        let w = tl.frame_windows();
        prop_assert_eq!(w[0].0, 0.0);
        prop_assert_eq!(w[f - 1].1, duration);
        for i in 0..f {
            if i + 1 < f {
                prop_assert_eq!(w[i].1, w[i + 1].0);
            }
            let c = tl.center(i);
            prop_assert!(w[i].0 <= c && c < w[i].1);
            prop_assert!(c > 0.0 && c < duration);
            prop_assert!((c / tl.step() - (i as f64 + 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn sample_indices_monotone(duration in 0.5f64..300.0, fps in 0.5f64..60.0, f in 1usize..40) {
        let tl = Timeline::new(duration, fps, f).unwrap();
        let idx = tl.sample_indices();
        prop_assert_eq!(idx.len(), f);
        let strict = fps * tl.step() >= 1.0;
        for w in idx.windows(2) {
            prop_assert!(w[0] <= w[1]);
            if strict {
                prop_assert!(w[0] < w[1]);
            }
        }
        let last = tl.available_frames().saturating_sub(1);
        prop_assert!(idx.iter().all(|&i| i <= last));
    }

    #[test]
    fn interpolation_bounded_and_exact_at_centres(
        duration in 1.0f64..200.0,
        scores in prop::collection::vec(0.0f64..1.0, 1..30),
        queries in prop::collection::vec(0.0f64..1.0, 1..20),
    ) {
        let f = scores.len();
        let tl = Timeline::uniform(duration, f).unwrap();
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let times: Vec<f64> = queries.iter().map(|q| q * duration).collect();
        for v in tl.interpolate_scores(&scores, &times).unwrap() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
        let centres: Vec<f64> = (0..f).map(|i| tl.center(i)).collect();
        let at = tl.interpolate_scores(&scores, &centres).unwrap();
        for (a, s) in at.iter().zip(&scores) {
            prop_assert!((a - s).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_continuous(
        duration in 1.0f64..200.0,
        scores in prop::collection::vec(0.0f64..1.0, 2..30),
        q in 0.0f64..1.0,
    ) {
        let tl = Timeline::uniform(duration, scores.len()).unwrap();
        let t = q * duration;
        let d = 1e-7 * duration;
        let v = tl.interpolate_scores(&scores, &[t, t + d]).unwrap();
        // slope is bounded by 1 / step
        prop_assert!((v[1] - v[0]).abs() <= d / tl.step() + 1e-9);
    }

    #[test]
    fn constant_curve(duration in 1.0f64..200.0, f in 1usize..30, c in 0.0f64..1.0, q in 0.0f64..1.0) {
        let tl = Timeline::uniform(duration, f).unwrap();
        let v = tl.interpolate_scores(&vec![c; f], &[q * duration]).unwrap();
        prop_assert!((v[0] - c).abs() < 1e-12);
    }
}
