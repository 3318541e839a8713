use causal_workbench::numkit::{logistic_fit, ols_fit, predict, DesignMatrix, NumError};
use proptest::prelude::*;

fn with_intercept(cols: &[(&str, &[f64])]) -> DesignMatrix {
    let labels = cols.iter().map(|(l, _)| l.to_string()).collect();
    let data: Vec<&[f64]> = cols.iter().map(|(_, c)| *c).collect();
    DesignMatrix::with_intercept(labels, &data).unwrap()
}

#[test]
fn exact_line_through_origin() {
    let fit = ols_fit(&with_intercept(&[("x", &[1.0, 2.0, 3.0])]), &[2.0, 4.0, 6.0]).unwrap();
    assert!(fit.coefficients[0].abs() < 1e-12);
    assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
}

#[test]
fn saturated_model_on_eight_unit_fixture_recovers_cell_means() {
    let l = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
    let a = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
    let y = [5.0, 7.0, 9.0, 11.0, 10.0, 16.0, 18.0, 20.0];
    let al: Vec<f64> = a.iter().zip(&l).map(|(a, l)| a * l).collect();
    let fit = ols_fit(&with_intercept(&[("a", &a), ("l", &l), ("a:l", &al)]), &y).unwrap();
    // cell means: (L0,A0)=6, (L0,A1)=10, (L1,A0)=10, (L1,A1)=18
    for (j, expect) in [6.0, 4.0, 4.0, 4.0].iter().enumerate() {
        assert!((fit.coefficients[j] - expect).abs() < 1e-12, "coef {j}");
    }
}

#[test]
fn duplicated_column_is_named() {
    let x = [1.0, 2.0, 4.0, 3.0, 5.0];
    let err = ols_fit(&with_intercept(&[("x", &x), ("x_copy", &x)]), &[1.0, 2.0, 3.0, 4.0, 6.0]).unwrap_err();
    assert_eq!(err, NumError::RankDeficient { columns: vec!["x_copy".into()] });
}

#[test]
fn logistic_intercept_only_half() {
    let d = DesignMatrix::with_intercept_rows(4, vec![], &[]).unwrap();
    let fit = logistic_fit(&d, &[1.0, 0.0, 1.0, 0.0]).unwrap();
    assert!(fit.coefficients[0].abs() < 1e-12);
}

#[test]
fn logistic_binary_covariate_gives_empirical_logits() {
    let l = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
    let a = [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let d = with_intercept(&[("l", &l)]);
    let fit = logistic_fit(&d, &a).unwrap();
    let lo = (0.25_f64 / 0.75).ln();
    assert!((fit.coefficients[0] - lo).abs() < 1e-9);
    assert!((fit.coefficients[1] + 2.0 * lo).abs() < 1e-9);
    let p = predict(&fit, &d).unwrap();
    assert!((p[4] - 0.75).abs() < 1e-9);
}

#[test]
fn separated_response_is_an_error() {
    let x = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    let y: Vec<f64> = x.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
    assert!(matches!(logistic_fit(&with_intercept(&[("x", &x)]), &y), Err(NumError::Separation { .. })));
}

fn lcg_data(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64)
    };
    let x1: Vec<f64> = (0..n).map(|_| next() * 4.0 - 2.0).collect();
    let x2: Vec<f64> = (0..n).map(|_| next()).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x1[i] - x2[i] + next()).collect();
    let a: Vec<f64> = (0..n)
        .map(|i| if next() < 1.0 / (1.0 + (-(0.3 + x1[i])).exp()) { 1.0 } else { 0.0 })
        .collect();
    (x1, x2, y, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ols_residuals_orthogonal_and_permutation_invariant(seed in any::<u64>(), shift in 0usize..40) {
        let n = 40;
        let (x1, x2, y, _) = lcg_data(seed, n);
        let d = with_intercept(&[("x1", &x1), ("x2", &x2)]);
        let fit = ols_fit(&d, &y).unwrap();
        let fitted = predict(&fit, &d).unwrap();
        for j in 0..d.columns() {
            let dot: f64 = d.column(j).iter().zip(y.iter().zip(&fitted)).map(|(x, (y, f))| x * (y - f)).sum();
            prop_assert!(dot.abs() < 1e-8 * n as f64);
        }
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let pfit = ols_fit(&d.select_rows(&perm), &yp).unwrap();
        for j in 0..3 {
            prop_assert!((pfit.coefficients[j] - fit.coefficients[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_score_vanishes_at_optimum(seed in any::<u64>()) {
        let n = 200;
        let (x1, x2, _, a) = lcg_data(seed, n);
        prop_assume!(a.contains(&1.0) && a.contains(&0.0));
        let d = with_intercept(&[("x1", &x1), ("x2", &x2)]);
        match logistic_fit(&d, &a) {
            Ok(fit) => {
                let p = predict(&fit, &d).unwrap();
                for j in 0..d.columns() {
                    let s: f64 = d.column(j).iter().zip(a.iter().zip(&p)).map(|(x, (a, p))| x * (a - p)).sum();
                    prop_assert!(s.abs() < 1e-6);
                }
            }
            Err(NumError::Separation { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}
