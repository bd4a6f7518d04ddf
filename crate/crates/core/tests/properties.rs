use proptest::prelude::*;

use tpspp::io::{decode_netpbm, decode_weights, grid_from_json};
use tpspp::tensor::{conv2d, tanh, Tensor};
use tpspp::tps::{build_kernel_matrix, make_grid, solve_transform, ControlPointGrid, Point};
use tpspp::tps_pp::{map_point, warp, BorderPolicy, SamplingGrid};
use tpspp::verify::oracle;

fn grid_strategy() -> impl Strategy<Value = ControlPointGrid> {
    (2usize..=5, 2usize..=10).prop_flat_map(|(r, c)| {
        proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3), r * c).prop_map(move |offs| {
            make_grid(r, c)
                .unwrap()
                .with_offsets(offs.into_iter().map(|(x, y)| Point::new(x, y)).collect())
                .unwrap()
        })
    })
}

fn pairs(p: &[Point]) -> Vec<(f64, f64)> {
    p.iter().map(|p| (p.x, p.y)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn base_points_land_on_targets(grid in grid_strategy()) {
        let t = solve_transform(&grid).unwrap();
        let zero = vec![0.0; grid.len()];
        for (k, &c) in grid.base().iter().enumerate() {
            let p = map_point(c, &t, &zero).unwrap();
            let q = grid.regressed_point(k);
            prop_assert!((p.x - q.x).abs() <= 1e-6 && (p.y - q.y).abs() <= 1e-6);
        }
    }

    #[test]
    fn kernel_matrix_symmetric_zero_diagonal(grid in grid_strategy()) {
        let s = build_kernel_matrix(&grid);
        let m = s.matrix();
        for i in 0..m.rows() {
            prop_assert_eq!(m[(i, i)], 0.0);
            for j in 0..m.cols() {
                prop_assert_eq!(m[(i, j)].to_bits(), m[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn zero_lambda_is_classic(
        grid in grid_strategy(),
        q in (-1.2f64..1.2, -1.2f64..1.2),
        seed in any::<u64>(),
    ) {
        let t = solve_transform(&grid).unwrap().with_weighting(0.0, 1.0);
        let mut s = seed;
        let row: Vec<f64> = (0..grid.len()).map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 1.98 - 0.99
        }).collect();
        let got = map_point(Point::new(q.0, q.1), &t, &row).unwrap();
        let reference = oracle::ClassicTps::fit(&pairs(grid.base()), &pairs(&grid.regressed())).unwrap();
        let (ex, ey) = reference.eval(q.0, q.1);
        prop_assert!((got.x - ex).abs() <= 1e-9 && (got.y - ey).abs() <= 1e-9);
    }

    #[test]
    fn attention_is_inert_without_kernel_weights(
        m in (0.7f64..1.3, -0.3f64..0.3, -0.3f64..0.3, 0.7f64..1.3),
        b in (-0.2f64..0.2, -0.2f64..0.2),
        row in proptest::collection::vec(-0.99f64..0.99, 64),
        q in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let base = make_grid(4, 16).unwrap();
        let offsets = base.base().iter().map(|p| Point::new(
            m.0 * p.x + m.1 * p.y + b.0 - p.x,
            m.2 * p.x + m.3 * p.y + b.1 - p.y,
        )).collect();
        let t = solve_transform(&base.with_offsets(offsets).unwrap()).unwrap();
        let p = Point::new(q.0, q.1);
        let plain = map_point(p, &t, &[0.0; 64]).unwrap();
        let weighted = map_point(p, &t, &row).unwrap();
        prop_assert!(plain.distance(weighted) <= 1e-7);
    }

    #[test]
    fn nudging_one_offset_moves_points_a_bounded_amount(
        grid in grid_strategy(),
        pick in any::<prop::sample::Index>(),
        angle in 0.0f64..std::f64::consts::TAU,
        q in (-1.0f64..1.0, -1.0f64..1.0),
    ) {
        let eps = 1e-4;
        let k = pick.index(grid.len());
        let mut offsets = grid.offsets().to_vec();
        offsets[k] = offsets[k] + Point::new(eps * angle.cos(), eps * angle.sin());
        let a = solve_transform(&grid).unwrap();
        let b = solve_transform(&grid.clone().with_offsets(offsets).unwrap()).unwrap();
        let row = vec![0.5; grid.len()];
        let p = Point::new(q.0, q.1);
        let shift = map_point(p, &a, &row).unwrap().distance(map_point(p, &b, &row).unwrap());
        prop_assert!(shift <= 10.0 * eps * grid.len() as f64);
    }

    #[test]
    fn identity_warp_passes_through(c in 1usize..4, h in 1usize..16, w in 1usize..16, seed in any::<u32>()) {
        let src = Tensor::from_fn(&[c, h, w], |i| ((i as u32).wrapping_mul(2654435761) ^ seed) as f32 / u32::MAX as f32).unwrap();
        for border in [BorderPolicy::Zeros, BorderPolicy::Clamp] {
            let out = warp(&src, &SamplingGrid::identity(h, w), border).unwrap();
            for (a, b) in out.data().iter().zip(src.data()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn warp_matches_bilinear_oracle(
        h in 2usize..12,
        w in 2usize..12,
        coords in proptest::collection::vec((-1.4f64..1.4, -1.4f64..1.4), 12),
        clamp in any::<bool>(),
    ) {
        let src = Tensor::from_fn(&[1, h, w], |i| (i % 13) as f32 / 13.0).unwrap();
        let grid = SamplingGrid::new(3, 4, coords.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
        let border = if clamp { BorderPolicy::Clamp } else { BorderPolicy::Zeros };
        let out = warp(&src, &grid, border).unwrap();
        for (i, &(x, y)) in coords.iter().enumerate() {
            let want = oracle::bilinear(&src, 0, x, y, clamp);
            prop_assert!((out.data()[i] as f64 - want).abs() <= 1e-6);
        }
    }

    #[test]
    fn conv_matches_nested_loops(
        c in 1usize..4, o in 1usize..4, k in 1usize..4, stride in 1usize..3,
        h in 3usize..9, w in 3usize..9, seed in any::<u64>(),
    ) {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
        };
        let x = Tensor::from_fn(&[c, h, w], |_| next()).unwrap();
        let kern = Tensor::from_fn(&[o, c, k, k], |_| next()).unwrap();
        let bias = Tensor::from_fn(&[o], |_| next()).unwrap();
        let got = conv2d(&x, &kern, &bias, stride, k / 2).unwrap();
        let want = oracle::conv2d(&x, &kern, &bias, stride, k / 2);
        prop_assert_eq!(got.len(), want.len());
        for (a, b) in got.data().iter().zip(&want) {
            prop_assert!((*a as f64 - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn tanh_scores_stay_open(v in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
        let t = tanh(&Tensor::new(&[v.len()], v).unwrap());
        prop_assert!(t.data().iter().all(|a| a.abs() < 1.0));
    }

    #[test]
    fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_weights(&bytes);
        let _ = decode_netpbm(&bytes);
        if let Ok(s) = std::str::from_utf8(&bytes) {
            let _ = grid_from_json(s);
        }
    }

    #[test]
    fn tpsw_prefix_never_panics(body in proptest::collection::vec(any::<u8>(), 0..128)) {
        let mut bytes = b"TPSW\x01\0\0\0".to_vec();
        bytes.extend(body);
        let _ = decode_weights(&bytes);
    }
}
