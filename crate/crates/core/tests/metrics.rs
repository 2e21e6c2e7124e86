use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

mod common;
use common::simulate_votes;

use trajatlas::camera::Bbox2D;
use trajatlas::metrics::*;
use trajatlas::render::{FrameBuffer, MaskFrame, MASK_BACKGROUND, MASK_FOREGROUND};

fn mask_with_box(w: u32, h: u32, b: Option<Bbox2D>) -> MaskFrame {
    let mut m = MaskFrame::filled(w, h, MASK_BACKGROUND);
    if let Some(b) = b {
        for y in b.y_min..=b.y_max {
            for x in b.x_min..=b.x_max {
                m.data[(y as u32 * w + x as u32) as usize] = MASK_FOREGROUND;
            }
        }
    }
    m
}

fn raster_iou(a: &Bbox2D, b: &Bbox2D) -> f64 {
    let (mut inter, mut union) = (0i64, 0i64);
    let x0 = a.x_min.min(b.x_min);
    let x1 = a.x_max.max(b.x_max);
    let y0 = a.y_min.min(b.y_min);
    let y1 = a.y_max.max(b.y_max);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (ia, ib) = (a.contains(x, y), b.contains(x, y));
            inter += (ia && ib) as i64;
            union += (ia || ib) as i64;
        }
    }
    inter as f64 / union as f64
}

fn arb_box() -> impl Strategy<Value = Bbox2D> {
    (0i64..40, 0i64..40, 0i64..15, 0i64..15).prop_map(|(x, y, w, h)| Bbox2D::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn iou_matches_raster_and_is_symmetric(a in arb_box(), b in arb_box(), dx in -20i64..20, dy in -20i64..20) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, raster_iou(&a, &b));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v == 1.0, a == b);
        let shift = |r: &Bbox2D| Bbox2D::new(r.x_min + dx, r.y_min + dy, r.x_max + dx, r.y_max + dy);
        prop_assert_eq!(iou(&shift(&a), &shift(&b)), v);
    }

    #[test]
    fn ssim_of_frame_with_itself_is_one(
        seed in any::<u64>(),
        fg in proptest::option::of((0u32..30, 0u32..24)),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = FrameBuffer::filled(30, 24, [0, 0, 0]);
        f.data.iter_mut().for_each(|v| *v = rng.random());
        let mut m = MaskFrame::filled(30, 24, MASK_BACKGROUND);
        if let Some((x, y)) = fg {
            m.data[(y * 30 + x) as usize] = MASK_FOREGROUND;
        }
        prop_assert_eq!(masked_ssim(&f, &f, &m).unwrap(), 1.0);
    }

    #[test]
    fn bt_prob_is_complementary(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let p = bt_prob(a, b);
        prop_assert!(p > 0.0 && p < 1.0);
        prop_assert!((p + bt_prob(b, a) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn iou_traj_examples() {
    let (w, h) = (40, 30);
    let a = Bbox2D::new(0, 0, 9, 9);
    let gt: Vec<_> = [Some(a), Some(a), None, Some(a)].into_iter().map(|b| mask_with_box(w, h, b)).collect();
    assert_eq!(iou_traj(&gt, &gt).unwrap().mean, 1.0);

    let empty = vec![mask_with_box(w, h, None); 4];
    let full_gt = vec![mask_with_box(w, h, Some(a)); 4];
    assert_eq!(iou_traj(&empty, &full_gt).unwrap().mean, 0.0);

    // per-frame values 1, 1/3, excluded, 0
    let pred: Vec<_> = [Some(a), Some(Bbox2D::new(5, 0, 14, 9)), Some(a), None]
        .into_iter()
        .map(|b| mask_with_box(w, h, b))
        .collect();
    let s = iou_traj(&pred, &gt).unwrap();
    assert_eq!(s.values[2], None);
    assert_eq!(s.valid_frames(), 3);
    assert!((s.mean - 4.0 / 9.0).abs() < 1e-15);

    assert!(matches!(iou_traj(&empty, &empty), Err(MetricsError::NoValidFrames)));
    assert!(matches!(iou_traj(&empty[..3], &empty), Err(MetricsError::Mismatch(_))));
}

#[test]
fn ssim_anchors() {
    let bg = MaskFrame::filled(32, 24, MASK_BACKGROUND);
    let black = FrameBuffer::filled(32, 24, [0, 0, 0]);
    let white = FrameBuffer::filled(32, 24, [255, 255, 255]);
    let expected = SSIM_C1 / (255.0 * 255.0 + SSIM_C1);
    assert!((masked_ssim(&black, &white, &bg).unwrap() - expected).abs() < 1e-6);
    assert!((expected - 1.0e-4).abs() < 1e-6);

    let fg = MaskFrame::filled(32, 24, MASK_FOREGROUND);
    assert!(matches!(masked_ssim(&black, &black, &fg), Err(MetricsError::EmptyBackground)));
    let small = FrameBuffer::filled(8, 8, [0, 0, 0]);
    assert!(masked_ssim(&small, &black, &bg).is_err());
}

#[test]
fn ssim_ignores_the_dilated_foreground() {
    // a difference hidden under the foreground (plus its dilation) is invisible
    let (w, h) = (40, 40);
    let a = FrameBuffer::filled(w, h, [90, 120, 60]);
    let mut b = a.clone();
    let mut m = MaskFrame::filled(w, h, MASK_BACKGROUND);
    for y in 15..25u32 {
        for x in 15..25u32 {
            m.data[(y * w + x) as usize] = MASK_FOREGROUND;
        }
    }
    // change pixels up to 4 px outside the mask, inside the dilation
    for y in 11..29u32 {
        for x in 11..29u32 {
            let i = ((y * w + x) * 3) as usize;
            b.data[i..i + 3].copy_from_slice(&[250, 10, 10]);
        }
    }
    // windows centered in the background still see changed pixels, so the
    // score drops but only dilated-background centers count
    let masked = masked_ssim(&a, &b, &m).unwrap();
    let all = masked_ssim(&a, &b, &MaskFrame::filled(w, h, MASK_BACKGROUND)).unwrap();
    assert!(masked < 1.0 && masked > all);
}

#[test]
fn ssim_video_means() {
    let m = MaskFrame::filled(32, 24, MASK_BACKGROUND);
    let black = FrameBuffer::filled(32, 24, [0, 0, 0]);
    let white = FrameBuffer::filled(32, 24, [255, 255, 255]);
    let gt = vec![black.clone(); 3];
    let masks = vec![m.clone(); 3];
    assert_eq!(ssim_bg_video(&gt, &gt, &masks, None).unwrap().mean, 1.0);
    assert_eq!(ssim_bg_video(&gt, &gt, &masks, Some(&masks)).unwrap().mean, 1.0);

    let pred = vec![black.clone(), white.clone()];
    let s = ssim_bg_video(&pred, &gt[..2], &masks[..2], None).unwrap();
    let v1 = s.values[1].unwrap();
    assert_eq!(s.values[0], Some(1.0));
    assert_eq!(s.mean, (1.0 + v1) / 2.0);
    assert!(s.mean < 1.0);

    assert!(matches!(ssim_bg_video(&pred, &gt, &masks, None), Err(MetricsError::Mismatch(_))));
}

#[test]
fn union_mask_takes_both_foregrounds() {
    let a = mask_with_box(10, 10, Some(Bbox2D::new(0, 0, 1, 1)));
    let b = mask_with_box(10, 10, Some(Bbox2D::new(8, 8, 9, 9)));
    let u = mask_union(&a, &b).unwrap();
    assert_eq!(u.foreground_count(), 8);
}

#[test]
fn bt_prob_examples() {
    assert_eq!(bt_prob(0.3, 0.3), 0.5);
    assert!((bt_prob(3f64.ln(), 0.0) - 0.75).abs() < 1e-15);
    assert!((bt_prob(1.25, -0.48) - 0.8494).abs() < 1e-4);
}

fn votes(pairs: &[(&str, &str, usize)]) -> VoteSet {
    let mut all = Vec::new();
    for &(w, l, k) in pairs {
        all.extend(std::iter::repeat_n((w, l), k));
    }
    VoteSet::from_named(&all).unwrap()
}

#[test]
fn ilsr_two_item_cases() {
    for alpha in [0.0, 0.01, 1.0] {
        let u = bt_fit_ilsr(&votes(&[("a", "b", 2), ("b", "a", 2)]), alpha).unwrap();
        assert!(u.values.iter().all(|v| v.abs() < 1e-8), "{u:?}");
    }
    let u = bt_fit_ilsr(&votes(&[("a", "b", 3), ("b", "a", 1)]), 0.0).unwrap();
    assert!((u.values[0] - u.values[1] - 3f64.ln()).abs() < 1e-6);
    assert!(u.values.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn ilsr_rejects_disconnected_graphs_without_regularization() {
    let v = votes(&[("a", "b", 3)]);
    assert!(matches!(bt_fit_ilsr(&v, 0.0), Err(MetricsError::Disconnected)));
    let u = bt_fit_ilsr(&v, 0.1).unwrap();
    assert!(u.values[0] > u.values[1]);
    assert!(bt_fit_ilsr(&v, -1.0).is_err());
}

/// Gradient ascent on the Bradley–Terry log-likelihood.
fn mle_by_gradient_ascent(v: &VoteSet) -> Vec<f64> {
    let n = v.items.len();
    let mut u = vec![0.0; n];
    for _ in 0..200_000 {
        let mut g = vec![0.0; n];
        for &(w, l) in &v.votes {
            let p = bt_prob(u[w], u[l]);
            g[w] += 1.0 - p;
            g[l] -= 1.0 - p;
        }
        let step = 1.0 / v.votes.len() as f64;
        let mut biggest: f64 = 0.0;
        for i in 0..n {
            u[i] += step * g[i];
            biggest = biggest.max(g[i].abs());
        }
        if biggest < 1e-10 {
            break;
        }
    }
    let mean = u.iter().sum::<f64>() / n as f64;
    u.iter().map(|x| x - mean).collect()
}

#[test]
fn ilsr_fixed_point_is_the_likelihood_maximum() {
    let v = votes(&[
        ("a", "b", 5),
        ("b", "a", 2),
        ("b", "c", 4),
        ("c", "b", 3),
        ("c", "a", 2),
        ("a", "c", 3),
        ("d", "a", 1),
        ("a", "d", 2),
        ("c", "d", 3),
        ("d", "b", 2),
    ]);
    let fit = bt_fit_ilsr(&v, 0.0).unwrap();
    let oracle = mle_by_gradient_ascent(&v);
    for (a, b) in fit.values.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-4, "{:?} vs {:?}", fit.values, oracle);
    }
}

#[test]
fn ilsr_is_equivariant_under_relabeling() {
    let v = votes(&[("a", "b", 4), ("b", "c", 3), ("c", "a", 1), ("b", "a", 1), ("c", "b", 2)]);
    let perm = [2usize, 0, 1];
    let items: Vec<String> = perm.iter().map(|&i| v.items[i].clone()).collect();
    let inv: Vec<usize> = (0..3).map(|i| perm.iter().position(|&p| p == i).unwrap()).collect();
    let relabeled = VoteSet::new(items, v.votes.iter().map(|&(w, l)| (inv[w], inv[l])).collect()).unwrap();
    let a = bt_fit_ilsr(&v, 0.01).unwrap();
    let b = bt_fit_ilsr(&relabeled, 0.01).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert!((b.values[k] - a.values[i]).abs() < 1e-9);
    }
}

#[test]
fn shifting_true_utilities_changes_nothing() {
    let u = [0.75, 0.25, -0.5, -0.5];
    let shifted: Vec<f64> = u.iter().map(|x| x + 2.0).collect();
    let a = bt_fit_ilsr(&simulate_votes(&u, 2000, 3), 0.01).unwrap();
    let b = bt_fit_ilsr(&simulate_votes(&shifted, 2000, 3), 0.01).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn ranked_orders_strongest_first() {
    let u = bt_fit_ilsr(&votes(&[("x", "y", 3), ("y", "z", 3), ("x", "z", 3), ("z", "x", 1), ("y", "x", 1), ("z", "y", 1)]), 0.0)
        .unwrap();
    let names: Vec<_> = u.ranked().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["x", "y", "z"]);
}

#[test]
fn vote_csv_parsing() {
    let p = Path::new("votes.csv");
    let v = VoteSet::from_csv_reader("winner,loser\nA,B\nB , C\n".as_bytes(), p).unwrap();
    assert_eq!(v.items, ["A", "B", "C"]);
    assert_eq!(v.votes, [(0, 1), (1, 2)]);

    let line_of = |text: &str| match VoteSet::from_csv_reader(text.as_bytes(), p) {
        Err(MetricsError::Csv { line, .. }) => line,
        other => panic!("expected csv error, got {other:?}"),
    };
    assert_eq!(line_of(""), 1);
    assert_eq!(line_of("winner,loser\n"), 1);
    assert_eq!(line_of("a,b\nA,B\n"), 1);
    assert_eq!(line_of("winner,loser\nA,B\nA,B,C\n"), 3);
    assert_eq!(line_of("winner,loser\nA,B\nC,C\n"), 3);
    assert_eq!(line_of("winner,loser\nA,B\nA,B\n,B\n"), 4);
}

