use std::path::Path;

use eot_bench::experiment::{run_one, write_trace, Instance, RunSpec};
use eot_bench::{grid_cost, load_idx};
use eot_core::oracle::lp_transport_simplex;
use eot_core::{CostMatrix, Measure, Method};
use ndarray::array;

fn mnist() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/mnist-sample-10-images.idx3-ubyte"))
}

#[test]
fn bundled_images_match_a_byte_level_reader() {
    let bytes = std::fs::read(mnist()).unwrap();
    assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
    for index in 0..10 {
        let img = load_idx(mnist(), index).unwrap();
        assert_eq!((img.height, img.width), (28, 28));
        let raw = &bytes[16 + 784 * index..16 + 784 * (index + 1)];
        let total: u64 = raw.iter().map(|&b| b as u64).sum();
        let w = img.measure.as_slice();
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (p, &b) in w.iter().zip(raw) {
            assert_eq!(*p, b as f64 / total as f64);
        }
    }
    assert!(load_idx(mnist(), 10).is_err());
}

#[test]
fn two_by_two_methods_agree_within_two_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance {
        a: Measure::new(array![0.3, 0.7]).unwrap(),
        b: Measure::new(array![0.6, 0.4]).unwrap(),
        cost: CostMatrix::new(array![[0.0, 1.0], [0.5, 0.2]]).unwrap(),
    };
    let eps = 0.01;
    let lp = lp_transport_simplex(&inst.a, &inst.b, &inst.cost).unwrap();
    let costs: Vec<f64> = [Method::EuclidSinkhorn, Method::Apdagd, Method::Aam, Method::Clvr, Method::EntropySinkhorn]
        .into_iter()
        .map(|m| {
            let spec = RunSpec::new(m, eps);
            let (summary, _) = run_one(&inst, &spec, dir.path(), &spec.file_stem()).unwrap();
            assert!(summary.converged && summary.error.is_none());
            summary.final_cost.unwrap()
        })
        .collect();
    for c in &costs {
        assert!(*c - lp.value <= eps);
        for d in &costs {
            assert!((c - d).abs() <= 2.0 * eps);
        }
    }
}

#[test]
fn traces_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = load_idx(mnist(), 3).unwrap();
    let b = load_idx(mnist(), 8).unwrap();
    // Coarse 7x7 instance by pooling 4x4 blocks keeps this quick.
    let pool = |m: &Measure| {
        let w = m.as_slice();
        Measure::normalised(ndarray::Array1::from_shape_fn(49, |k| {
            let (r, c) = (k / 7, k % 7);
            (0..16).map(|t| w[(4 * r + t / 4) * 28 + 4 * c + t % 4]).sum::<f64>() + 1e-3
        }))
        .unwrap()
    };
    let inst = Instance {
        a: pool(&a.measure),
        b: pool(&b.measure),
        cost: grid_cost(7, 7, true),
    };
    for method in [Method::EuclidSinkhorn, Method::Apdagd, Method::Aam, Method::Clvr, Method::EntropySinkhorn] {
        let mut spec = RunSpec::new(method, 0.02);
        spec.seed = 11;
        run_one(&inst, &spec, &dir.path().join("first"), "t").unwrap();
        run_one(&inst, &spec, &dir.path().join("second"), "t").unwrap();
        let x = std::fs::read(dir.path().join("first/t.csv")).unwrap();
        let y = std::fs::read(dir.path().join("second/t.csv")).unwrap();
        assert!(x.len() > 200);
        assert_eq!(x, y, "{method}");
    }
}

#[test]
fn wall_clock_is_opt_in() {
    let rec = eot_core::TraceRecord {
        iter: 1,
        elapsed: 0.25,
        primal_f: 1.0,
        dual_phi: 0.5,
        gap: 0.5,
        residuals: Default::default(),
        unregularised_cost: 0.75,
        sparsity: 0.0,
    };
    let mut quiet = Vec::new();
    write_trace(std::slice::from_ref(&rec), false, &mut quiet).unwrap();
    let mut timed = Vec::new();
    write_trace(&[rec], true, &mut timed).unwrap();
    assert_eq!(String::from_utf8(quiet).unwrap().lines().nth(1).unwrap(), "1,0.0,1.0,0.5,0.5,0.0,0.0,0.0,0.0,0.75,0.0");
    assert!(String::from_utf8(timed).unwrap().contains("1,0.25,"));
}

#[test]
fn failures_are_recorded_not_raised() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance {
        a: Measure::uniform(2).unwrap(),
        b: Measure::uniform(2).unwrap(),
        cost: CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap(),
    };
    let mut spec = RunSpec::new(Method::Aam, 0.1);
    spec.epsilon = f64::NAN;
    let (summary, out) = run_one(&inst, &spec, dir.path(), "bad").unwrap();
    assert!(out.is_none());
    assert!(summary.error.is_some());
    assert!(dir.path().join("bad.json").exists());
}
