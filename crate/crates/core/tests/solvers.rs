use proptest::prelude::*;
use uavmec_core::convex::{solve_convex, solve_lp, ConvexProgram, LinearProgram, SmoothConstraint, Status};

/// `||x_S - center||^2 <= r^2` on the support `S`.
struct Ball {
    support: Vec<usize>,
    center: Vec<f64>,
    r: f64,
}

impl SmoothConstraint for Ball {
    fn support(&self) -> &[usize] {
        &self.support
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.support.iter().zip(&self.center).map(|(&i, c)| (x[i] - c).powi(2)).sum::<f64>() - self.r * self.r
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let k = self.support.len();
        for (a, (&i, c)) in self.support.iter().zip(&self.center).enumerate() {
            grad[a] = 2.0 * (x[i] - c);
            for b in 0..k {
                hess[a * k + b] = if a == b { 2.0 } else { 0.0 };
            }
        }
    }
}

fn random_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), m),
            prop::collection::vec(0.0..10.0f64, n),
            prop::collection::vec(0.0..2.0f64, m),
        )
            .prop_map(move |(c, rows, x_feas, slack)| {
                let mut lp = LinearProgram::new(c);
                for (row, s) in rows.into_iter().zip(slack) {
                    let rhs = row.iter().zip(&x_feas).map(|(a, x)| a * x).sum::<f64>() + s;
                    lp.add_le(row, rhs);
                }
                for j in 0..n {
                    lp.set_bounds(j, 0.0, 10.0);
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lp_primal_and_dual_meet(lp in random_lp()) {
        let sol = solve_lp(&lp, 1e-9);
        prop_assert_eq!(sol.status, Status::Optimal);
        let dual = sol.dual_objective.unwrap();
        prop_assert!((sol.objective - dual).abs() <= 1e-7 * (1.0 + sol.objective.abs()), "{} vs {}", sol.objective, dual);
        prop_assert!(lp.primal_residual(&sol.x) <= 1e-7);
        prop_assert_eq!(solve_lp(&lp, 1e-9), sol);
    }

    #[test]
    fn barrier_stages_descend_and_stay_feasible(cx in -1.0..1.0f64, cy in -1.0..1.0f64, r in 0.5..3.0f64) {
        let mut prog = ConvexProgram::new(vec![cx, cy]);
        prog.push(Ball { support: vec![0, 1], center: vec![1.0, -1.0], r });
        prog.set_bounds(0, -5.0, 5.0).set_bounds(1, -5.0, 5.0);
        let sol = solve_convex(&prog, &[1.0, -1.0], 1e-9, 500);
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(prog.feasibility_residual(&sol.x) <= 1e-9);
        for w in sol.stage_objectives.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
        }
        let norm = (cx * cx + cy * cy).sqrt();
        if norm > 1e-3 {
            let exact = cx - cy - r * norm;
            prop_assert!((sol.objective - exact).abs() <= 1e-6 * (1.0 + exact.abs()));
        }
        prop_assert_eq!(solve_convex(&prog, &[1.0, -1.0], 1e-9, 500), sol);
    }
}

#[test]
fn infeasible_and_unbounded_lps() {
    let mut lp = LinearProgram::new(vec![1.0]);
    lp.add_le(vec![1.0], -1.0).set_bounds(0, 0.0, 10.0);
    assert_eq!(solve_lp(&lp, 1e-9).status, Status::Infeasible);

    let mut lp = LinearProgram::new(vec![-1.0]);
    lp.set_bounds(0, 0.0, f64::INFINITY);
    assert_eq!(solve_lp(&lp, 1e-9).status, Status::Unbounded);
}
