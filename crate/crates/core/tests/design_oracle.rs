mod common;

use hawkes_lasso::design::build_design;
use hawkes_lasso::dictionary::{CoefficientVector, HistogramDictionary};
use hawkes_lasso::point_process::{presets, simulate_thinning, SimulationOptions};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use common::{grid_oracle, max_relative_gap, snap, GRID_STEP};

#[test]
fn sweep_matches_grid_oracle() {
    let model = presets::experiment1();
    let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
    for seed in 0..5 {
        let raw = simulate_thinning(
            &model,
            SimulationOptions::new(1.0, 2.0),
            &mut Xoshiro256PlusPlus::seed_from_u64(seed),
        )
        .unwrap();
        let pts = snap(&raw);
        let sys = build_design(&pts, &dict, 2.0).unwrap();
        let oracle = grid_oracle(&pts, 4, 0.04, 2.0);
        let gap = max_relative_gap(&sys, &oracle);
        assert!(gap <= 1e-6, "seed {seed}: relative gap {gap}");
    }
}

#[test]
fn quadratic_form_equals_integrated_square() {
    let model = presets::experiment1();
    let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
    let raw = simulate_thinning(&model, SimulationOptions::new(1.0, 2.0), &mut rng).unwrap();
    let pts = snap(&raw);
    let sys = build_design(&pts, &dict, 2.0).unwrap();
    let a = CoefficientVector::new(dict, (0..dict.size()).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();

    // direct evaluation of psi_t^m(f_a) at grid midpoints
    let cells = (2.0 / GRID_STEP).round() as usize;
    let scale = dict.basis_sup();
    let mut lag = vec![0usize; 4];
    let mut direct = 0.0;
    for i in 0..cells {
        let t = (i as f64 + 0.5) * GRID_STEP;
        let mut psi = [a.spont(0), a.spont(1)];
        for source in 0..2 {
            dict.lag_counts(&pts, source, t, &mut lag);
            for (target, p) in psi.iter_mut().enumerate() {
                for (k, &c) in lag.iter().enumerate() {
                    *p += a.function(target, source)[k] * scale * c as f64;
                }
            }
        }
        direct += (psi[0] * psi[0] + psi[1] * psi[1]) * GRID_STEP;
    }
    let q = sys.quadratic_form(a.values());
    assert!((q - direct).abs() <= 1e-4 * direct.abs(), "{q} vs {direct}");
}

#[test]
fn bhat_dominates_predictors_at_events() {
    let model = presets::experiment3();
    let dict = HistogramDictionary::new(8, 4, 0.04).unwrap();
    let pts = simulate_thinning(
        &model,
        SimulationOptions::new(1.0, 3.0),
        &mut Xoshiro256PlusPlus::seed_from_u64(2),
    )
    .unwrap();
    let sys = build_design(&pts, &dict, 3.0).unwrap();
    let bhat = sys.bhat();
    for m in 0..8 {
        for &t in pts.times_in(m, 0.0, 3.0) {
            for col in dict.columns() {
                let v = dict.predictor_value(&pts, col, t, col.target()).unwrap();
                assert!(v.abs() <= bhat[dict.index(col)] + 1e-12);
            }
        }
    }
}

#[test]
fn cross_target_gram_entries_vanish() {
    let model = presets::experiment1();
    let dict = HistogramDictionary::new(2, 4, 0.04).unwrap();
    let pts = simulate_thinning(
        &model,
        SimulationOptions::new(1.0, 5.0),
        &mut Xoshiro256PlusPlus::seed_from_u64(8),
    )
    .unwrap();
    let g = build_design(&pts, &dict, 5.0).unwrap().gram_dense();
    let n = dict.block_size();
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            if r / n != c / n {
                assert_eq!(g[(r, c)], 0.0);
            }
        }
    }
    assert!((g.clone() - g.transpose()).amax() == 0.0);
}
