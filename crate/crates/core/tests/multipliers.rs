use num_complex::Complex64 as c64;

use robin_core::boundary_data::{sample_alpha, AlphaSpec};
use robin_core::grid::Grid;
use robin_core::multipliers::{
    crucial_inequality_gap, difference_quotient, dq_identity_residuals, gaussian_bump, hardy_ratio, random_bumps,
    trace_half_norm_check, trace_interpolation_check, virial_residual, CrucialLemma, HardyVariant,
};
use robin_core::operator::assemble;
use robin_core::resolvent::solve;
use robin_core::spectral::{eig_selfadjoint, SolverConfig};
use robin_core::Closure;

#[test]
fn virial_of_zero_field_vanishes() {
    let g = Grid::new(2, 3.0, 0.25).unwrap();
    let a = sample_alpha(&AlphaSpec::expression("1/(1+x1^2)"), &g).unwrap();
    let r = virial_residual(&vec![c64::default(); g.node_count()], &a, 0.7, None, &g).unwrap();
    assert_eq!(r.residual, 0.0);
}

#[test]
fn virial_of_bound_state_is_second_order() {
    let mut res = Vec::new();
    for h in [0.01, 0.005] {
        let g = Grid::new(1, 20.0, h).unwrap();
        let a = sample_alpha(&AlphaSpec::real(-1.0), &g).unwrap();
        let op = assemble(&g, &a).unwrap();
        let s = eig_selfadjoint(&op, 1, -1.2, &SolverConfig::default()).unwrap();
        let p = &s.pairs[0];
        assert!((p.value.re + 1.0).abs() < 1e-3);
        let r = virial_residual(&p.vector, &a, p.value.re, None, &g).unwrap();
        res.push(r.residual);
        assert!(r.residual <= 10.0 * h * h, "h = {h}: {}", r.residual);
    }
    let order = (res[0] / res[1]).log2();
    assert!((1.5..2.5).contains(&order), "order {order}");
}

#[test]
fn virial_is_affine_in_lambda() {
    let g = Grid::new(2, 8.0, 0.1).unwrap();
    let a = sample_alpha(&AlphaSpec::expression("1/(1+x1^2)"), &g).unwrap();
    let u = gaussian_bump(&g, &[0.5, 1.5], 0.8, &[0.3, -0.2]);
    let mass: f64 = u.iter().zip(g.quadrature_weights()).map(|(v, w)| w * v.norm_sqr()).sum();
    let r0 = virial_residual(&u, &a, 0.0, None, &g).unwrap();
    let r1 = virial_residual(&u, &a, 2.5, None, &g).unwrap();
    assert!((r1.lhs.re - r0.lhs.re - 2.5 * mass).abs() <= 1e-12 * r1.lhs.re.abs().max(1.0));
    assert_eq!(r0.residual, (r0.lhs - r0.rhs).norm());
}

fn resolvent_pair(lambda: c64) -> (Grid, robin_core::boundary_data::BoundaryFunction, Vec<c64>, Vec<c64>) {
    // The solution decays like exp(-0.24 |x|); at L = 4 the dropped wall terms
    // still flip the sign of the gap.
    let g = Grid::new(3, 6.0, 0.3).unwrap();
    let a = sample_alpha(&AlphaSpec::expression("0.2/(1+x1^2+x2^2)"), &g).unwrap();
    let f = gaussian_bump(&g, &[0.3, -0.2, 0.8], 0.7, &[0.0; 3]);
    let u = solve(&assemble(&g, &a).unwrap(), lambda, &f).unwrap().u;
    (g, a, u, f)
}

#[test]
fn crucial_gaps_for_a_resolvent_solution() {
    let lambda = c64::new(1.0, 0.5);
    let (g, a, u, f) = resolvent_pair(lambda);
    let (_, _, uc, fc) = resolvent_pair(lambda.conj());
    for which in [CrucialLemma::Lemma33, CrucialLemma::Lemma34] {
        let gap = crucial_inequality_gap(&u, &f, &a, lambda, &g, which).unwrap().signed_gap.unwrap();
        assert!(gap < 0.0, "{which:?}: {gap}");
        let flipped = crucial_inequality_gap(&uc, &fc, &a, lambda.conj(), &g, which).unwrap().signed_gap.unwrap();
        assert!((gap - flipped).abs() <= 1e-10 * gap.abs().max(1.0), "{gap} vs {flipped}");
    }
    let zero = vec![c64::default(); g.node_count()];
    let r = crucial_inequality_gap(&zero, &zero, &a, lambda, &g, CrucialLemma::Lemma33).unwrap();
    assert_eq!(r.signed_gap, Some(0.0));
    assert!(crucial_inequality_gap(&u, &f, &a, c64::new(1.0, 2.0), &g, CrucialLemma::Lemma34).is_err());
}

#[test]
fn difference_quotient_is_first_order_in_delta() {
    let g = Grid::new(2, 4.0, 0.05).unwrap();
    let u: Vec<c64> = g.sample(|x| c64::new(x[0].sin() * (-x[1] * x[1]).exp(), 0.0));
    let exact: Vec<f64> = g.sample(|x| x[0].cos() * (-x[1] * x[1]).exp());
    let err = |delta: f64| {
        let d = difference_quotient(&u, 0, delta, &g).unwrap();
        (0..g.node_count())
            .filter(|&i| g.point(i)[0].abs() < 2.0 && g.point(i)[1] < 2.0)
            .map(|i| (d[i].re - exact[i]).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(0.2) / err(0.1);
    assert!((1.8..2.2).contains(&ratio), "{ratio}");
    let c = vec![c64::new(2.0, -1.0); g.node_count()];
    let d = difference_quotient(&c, 0, 0.1, &g).unwrap();
    assert!(g.sample(|x| x[0].abs() < 3.5).iter().zip(&d).all(|(inside, v)| !inside || v.norm() < 1e-13));
}

#[test]
fn zero_field_has_zero_difference_residuals() {
    let g = Grid::new(3, 1.0, 0.25).unwrap();
    let z = vec![c64::default(); g.node_count()];
    let r = dq_identity_residuals(&z, &z, 2, 0.5, &g).unwrap();
    assert_eq!(r.product_rule + r.ibp, 0.0);
}

#[test]
fn trace_checks_on_bumps() {
    let g = Grid::new(2, 8.0, 0.1).unwrap();
    let vanishing: Vec<c64> = g.sample(|x| c64::new(x[1] * (-(x[0] * x[0] + (x[1] - 2.0).powi(2))).exp(), 0.0));
    let t = trace_half_norm_check(&vanishing, &g, Closure::Dirichlet).unwrap();
    assert_eq!(t.trace_norm_sq, 0.0);
    let bump = gaussian_bump(&g, &[0.5, 0.4], 0.8, &[0.6, 0.0]);
    let t = trace_half_norm_check(&bump, &g, Closure::Dirichlet).unwrap();
    assert!(t.trace_norm_sq < t.grad_norm_sq && t.trace_norm_sq > 0.0);
    assert!(t.extension_norm_sq <= t.grad_norm_sq);
    for u in random_bumps(&g, 100, 11) {
        for eps in [0.1, 1.0, 10.0] {
            let r = trace_interpolation_check(&u, &g, eps).unwrap();
            assert!(r.lhs <= r.rhs, "eps {eps}: {} > {}", r.lhs, r.rhs);
        }
    }
    let z = vec![c64::default(); g.node_count()];
    let r = trace_interpolation_check(&z, &g, 1.0).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(trace_interpolation_check(&z, &g, 0.0).is_err());
    assert!(trace_half_norm_check(&vec![c64::default(); 10], &Grid::new(1, 1.0, 0.1).unwrap(), Closure::Dirichlet).is_err());
}

#[test]
fn hardy_ratio_of_a_far_bump_is_small() {
    let g = Grid::new(3, 6.0, 0.2).unwrap();
    let psi = gaussian_bump(&g, &[3.5, 0.0, 2.0], 0.6, &[0.0; 3]);
    let r = hardy_ratio(&psi, &g, HardyVariant::Unweighted).unwrap();
    assert!(r < 0.4, "{r}");
}

#[test]
fn near_continuum_solve_keeps_its_certificate() {
    let g = Grid::new(1, 20.0, 0.02).unwrap();
    let op = assemble(&g, &sample_alpha(&AlphaSpec::real(0.5), &g).unwrap()).unwrap();
    let f = gaussian_bump(&g, &[3.0], 1.0, &[0.0]);
    let sol = solve(&op, c64::new(1.0, 0.01), &f).unwrap();
    assert!(sol.diagnostics.residual <= 1e-10);
    let ratio = op.norm(&op.restrict(&sol.u)) / op.norm(&op.restrict(&f));
    assert!(ratio > 1.0, "{ratio}");
}
