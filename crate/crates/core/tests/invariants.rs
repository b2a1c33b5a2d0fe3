// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use num_complex::Complex64;

use friedrichs::evolution;
use friedrichs::majorants;
use friedrichs::transform::{self, IterateOptions};
use friedrichs::{EntryMode, Grid, GridFunction, KernelFn, KernelOperator, MultiplicationOperator, ScalarFn};

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn setup(n: usize) -> (MultiplicationOperator, KernelOperator, KernelOperator) {
    let g = Grid::unit(n).unwrap();
    let s = MultiplicationOperator::from_fn(&ScalarFn::new("x+x^2/2", |x| x + 0.5 * x * x), &g).unwrap();
    let v = KernelOperator::from_kernel_fn(
        &KernelFn::new("v", |x, t| (x - t) * (1.0 + (5.0 * t).sin())),
        &g,
        EntryMode::NodeSample,
    )
    .unwrap();
    let w = majorants::discrete_majorant(&s, &v).unwrap();
    (s, v, w)
}

#[test]
fn commutator_solve_is_exact() {
    let (s, v, _) = setup(96);
    let x = s.solve_commutator(&v).unwrap();
    let back = s.commutator(&x).unwrap();
    let scale = v.kernel().iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    for (a, b) in back.kernel().iter().zip(v.kernel().iter()) {
        assert!((a - b).abs() <= 1e-13 * scale);
    }
}

#[test]
fn transform_solves_intertwining_with_nontrivial_phi() {
    let (s, v, w) = setup(128);
    let t = transform::friedrichs_iterate(&s, &v, &w, IterateOptions::default()).unwrap();
    assert!(t.converged);
    assert!(t.residual <= 1e-8, "{}", t.residual);
    assert_eq!(t.residual, transform::intertwining_residual(&s, &v, &t.k).unwrap());
    assert!(t.chain.holds && t.chain.sharp_holds);
    assert!(transform::aggregate_bound(&t.k, &w).unwrap().holds);
    // ratios are term-norm quotients
    for (r, pair) in t.ratios.iter().zip(t.term_norms.windows(2)) {
        assert!((r - pair[1] / pair[0]).abs() <= 1e-12 * r.abs());
    }
}

#[test]
fn partial_sums_tighten_residual() {
    let (s, v, w) = setup(64);
    let coarse = transform::friedrichs_iterate(&s, &v, &w, IterateOptions { tol: 1e-2, n_cap: 200 }).unwrap();
    let fine = transform::friedrichs_iterate(&s, &v, &w, IterateOptions { tol: 1e-12, n_cap: 200 }).unwrap();
    assert!(coarse.terms_used < fine.terms_used);
    assert!(fine.residual < coarse.residual);
}

#[test]
fn inverse_and_conjugation() {
    let (s, v, w) = setup(96);
    let t = transform::friedrichs_iterate(&s, &v, &w, IterateOptions::default()).unwrap();
    let inv = transform::invert_transform(&t.k).unwrap();
    assert!(inv.agrees());
    assert!(inv.identity_residual <= 1e-12);
    // (I + M)(S + V)(I + K) = S up to the intertwining residual
    let n = 96;
    let id = ndarray::Array2::<f64>::eye(n);
    let tmat = s.matrix() + v.matrix();
    let lhs = (&id + &inv.m.matrix()).dot(&tmat).dot(&(&id + &t.k.matrix()));
    let gap = friedrichs::linalg::frobenius((&lhs - &s.matrix()).view()) / friedrichs::linalg::frobenius(s.matrix().view());
    assert!(gap <= 10.0 * t.residual + 1e-13, "{gap}");
    let cond = transform::condition_number(&t.k, &inv).unwrap();
    assert!(cond >= 1.0);
}

#[test]
fn multiplication_group_is_unitary() {
    let g = Grid::unit(200).unwrap();
    let s = MultiplicationOperator::from_fn(&ScalarFn::new("e^x", f64::exp), &g).unwrap();
    let f = GridFunction::sample(&ScalarFn::new("f", |x| 1.0 + (7.0 * x).sin()), &g).unwrap();
    for &t in &[0.0, 0.3, 4.0, 19.5, -2.0] {
        let e = evolution::evolve_s(&s, t, &f).unwrap();
        assert!((e.norm2() - f.norm2()).abs() <= 1e-13 * f.norm2());
    }
}

#[test]
fn perturbed_group_property() {
    let (s, v, _) = setup(64);
    let e = |t: f64| evolution::evolution_matrix(&s, &v, t, evolution::DEFAULT_T_CAP).unwrap();
    for &(a, b) in &[(0.5, 1.5), (3.0, 4.0), (-2.0, 2.0)] {
        let prod = e(a).dot(&e(b));
        let sum = e(a + b);
        let gap = friedrichs::linalg::frobenius_complex((&prod - &sum).view()) / friedrichs::linalg::frobenius_complex(sum.view());
        assert!(gap <= 1e-11, "{a}+{b}: {gap}");
    }
    let zero = e(0.0);
    let eye = ndarray::Array2::<Complex64>::eye(64);
    assert!(friedrichs::linalg::frobenius_complex((&zero - &eye).view()) <= 1e-14);
}

#[test]
fn time_cap_is_enforced() {
    let (s, v, _) = setup(16);
    assert!(evolution::evolution_matrix(&s, &v, 150.0, evolution::DEFAULT_T_CAP).is_err());
}

#[test]
fn direct_and_conjugated_groups_agree() {
    let (s, v, w) = setup(96);
    let t = transform::friedrichs_iterate(&s, &v, &w, IterateOptions::default()).unwrap();
    let inv = transform::invert_transform(&t.k).unwrap();
    let f = GridFunction::sample(&ScalarFn::new("f", |x| x.cos()), s.grid()).unwrap();
    for &time in &[0.0, 2.0, 11.0] {
        let d = evolution::evolve_t(&s, &v, time, &f, evolution::DEFAULT_T_CAP).unwrap();
        let c = evolution::conjugated_evolution_with(&t.k, &inv.m, &s, time, &f).unwrap();
        assert!(d.relative_gap(&c).unwrap() <= 1e-9);
    }
    let grid: Vec<f64> = (0..=10).map(f64::from).collect();
    let scan = evolution::stability_scan(&s, &v, Some((&t.k, &inv)), &grid, evolution::DEFAULT_T_CAP).unwrap();
    assert!(scan.sup_norm <= scan.cond_bound.unwrap() * (1.0 + 1e-9));
    assert!(scan.conjugation_gap.unwrap() <= 1e-9);
}

#[test]
fn presets_certify_as_documented() {
    let g = Grid::unit(256).unwrap();
    let id = ScalarFn::identity();
    for (name, kv, expect) in [
        ("constant-times-lag", vec![("c", 1.0)], "similar-by-cor1"),
        ("fractional", vec![("alpha", 2.0)], "similar-by-cor1"),
        ("cesaro", vec![("c", 0.1)], "similar-by-thm1"),
        ("rank-one-bumps", vec![("scale", 1.0)], "similar-by-cor1"),
        ("log-moduli", vec![("delta1", 0.3), ("delta2", 0.3)], "inconclusive"),
    ] {
        let p = majorants::make_preset(name, &params(&kv)).unwrap();
        let w = p.majorant_operator(&id, &g, EntryMode::NodeSample).unwrap();
        let q = p.convolution_majorant(g.span());
        let cert = transform::spr_certificate(&w, q.as_ref(), transform::DEFAULT_SPR_MARGIN).unwrap();
        assert_eq!(cert.verdict.as_str(), expect, "{name}");
    }
}

#[test]
fn divergence_is_reported_with_history() {
    let g = Grid::unit(64).unwrap();
    let s = MultiplicationOperator::identity(&g);
    let v = KernelOperator::from_kernel_fn(&KernelFn::new("50(x-t)", |x, t| 50.0 * (x - t)), &g, EntryMode::NodeSample).unwrap();
    let w = majorants::discrete_majorant(&s, &v).unwrap();
    match transform::friedrichs_iterate(&s, &v, &w, IterateOptions::default()) {
        Err(friedrichs::Error::Divergence { ratios, term_norms, .. }) => {
            assert!(ratios.len() >= transform::DIVERGENCE_RUN);
            assert!(ratios.iter().rev().take(transform::DIVERGENCE_RUN).all(|r| *r >= 1.0));
            assert_eq!(term_norms.len(), ratios.len() + 1);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}
