//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line; run with
//! `cargo test -p eipl-core --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

mod common;

use std::collections::HashMap;
use std::time::Instant;

use chrono::{TimeZone, Utc};
use common::*;
use eipl_core::codegen::{Generator, RetryPolicy, VariantCache};
use eipl_core::domain::{validate_function_name, SoloCategory, StudentResponse, Violation};
use eipl_core::fixtures::MockFixture;
use eipl_core::grading::{Grader, GradingPolicy, GradingSettings};
use eipl_core::parallel::Exec;
use eipl_core::psychometrics::irt::{evaluate, icc_probability, Params};
use eipl_core::psychometrics::{
    classify_discrimination, cohens_kappa, fit_2pl, DiscriminationBand, FitConfig, ScoreMatrix,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

fn fitted_params(fit: &eipl_core::psychometrics::FitResult) -> Params {
    Params {
        a: fit.items.items.iter().map(|e| e.a).collect(),
        b: fit.items.items.iter().map(|e| e.b).collect(),
        theta: fit.abilities.thetas(),
    }
}

#[test]
fn ac1_icc_sanity() {
    let started = Instant::now();
    let mut rng = rng(1);
    let grid: Vec<f64> = (0..=600).map(|k| -3.0 + 0.01 * k as f64).collect();
    let mut worst_center = 0.0f64;
    let mut monotone = true;
    for _ in 0..1000 {
        let a: f64 = rng.random_range(0.0..=2.0);
        let b: f64 = rng.random_range(-3.0..=3.0);
        worst_center = worst_center.max((icc_probability(b, a, b) - 0.5).abs());
        if a > 0.0 {
            monotone &= grid
                .windows(2)
                .all(|w| icc_probability(w[1], a, b) > icc_probability(w[0], a, b));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst_center <= 1e-12 && monotone && elapsed < 1.0;
    assert!(verdict(
        "AC1",
        "ICC sanity",
        pass,
        &format!("max |P(b)-0.5| = {worst_center:.1e}, strictly increasing = {monotone}, {elapsed:.3}s")
    ));
}

#[test]
fn ac2_gradient_check() {
    let started = Instant::now();
    let mut rng = rng(2);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut worst_loss = 0.0f64;
    for _ in 0..100 {
        let (students, items) = (20, 5);
        let mut m = ScoreMatrix::new(ids("s", students), ids("q", items)).unwrap();
        for j in 0..students {
            for i in 0..items {
                if rng.random_bool(0.75) {
                    m.set(j, i, Some(rng.random_range(0.0..=1.0))).unwrap();
                }
            }
        }
        let p = draw_params(&mut rng, items, students, (0.0, 2.0), (-3.0, 3.0));
        let eval = evaluate(&m, &p, Exec::default());
        worst_loss = worst_loss.max((eval.loss - naive_loss(&m, &p)).abs() / eval.loss);
        let analytic = eval.gradient;
        let loss = |q: &Params| evaluate(&m, q, Exec::Sequential).loss;
        let central = |apply: &dyn Fn(&mut Params, f64)| {
            let mut plus = p.clone();
            apply(&mut plus, h);
            let mut minus = p.clone();
            apply(&mut minus, -h);
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        };
        let mut numeric = Vec::new();
        let mut exact = Vec::new();
        for i in 0..items {
            numeric.push(central(&|q, d| q.a[i] += d));
            exact.push(analytic.a[i]);
            numeric.push(central(&|q, d| q.b[i] += d));
            exact.push(analytic.b[i]);
        }
        for j in 0..students {
            numeric.push(central(&|q, d| q.theta[j] += d));
            exact.push(analytic.theta[j]);
        }
        let diff: f64 = exact.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|y| y * y).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(f64::MIN_POSITIVE));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst < 1e-5 && worst_loss < 1e-12 && elapsed < 10.0;
    assert!(verdict(
        "AC2",
        "gradient check",
        pass,
        &format!("max relative error {worst:.2e} over 100 matrices, loss vs direct sum {worst_loss:.1e}, {elapsed:.2}s")
    ));
}

#[test]
fn ac3_oracle_recovery() {
    let started = Instant::now();
    let mut rng = rng(3);
    let (students, items) = (200, 8);
    let truth = draw_params(&mut rng, items, students, (0.0, 2.0), (-3.0, 3.0));
    let generating = probability_matrix(&truth);
    let m = dense(&generating, students, items);
    // The default relative-change stop ends the fixed-step descent while the
    // loss is still visibly above the floor, so the fit is run to stall: it
    // stops once no halved step lowers the loss any further.
    let default_gap = {
        let fit = fit_2pl(&m, &FitConfig::default()).unwrap();
        fit.report.final_loss - fit.report.entropy_floor
    };
    let config = FitConfig {
        tolerance: 0.0,
        ..FitConfig::default()
    };
    let fit = fit_2pl(&m, &config).unwrap();
    let fitted = probability_matrix(&fitted_params(&fit));
    let err = rmse(&fitted, &generating);
    let gap = fit.report.final_loss - fit.report.entropy_floor;
    let elapsed = started.elapsed().as_secs_f64();
    let pass = err < 0.02 && gap.abs() <= 1e-6 && elapsed < 60.0;
    assert!(verdict(
        "AC3",
        "oracle recovery",
        pass,
        &format!(
            "P-matrix RMSE {err:.2e}, loss - entropy floor {gap:.2e} after {} iterations ({:?}; {default_gap:.1e} at the default tolerance), {elapsed:.2}s",
            fit.report.iterations, fit.report.stop_reason
        )
    ));
}

#[test]
fn ac4_dichotomous_ordering() {
    let started = Instant::now();
    let mut rng = rng(4);
    let (students, items) = (500, 8);
    let truth = draw_params(&mut rng, items, students, (0.25, 2.0), (-2.5, 2.5));
    let scores: Vec<f64> = probability_matrix(&truth)
        .into_iter()
        .map(|p| if rng.random_bool(p) { 1.0 } else { 0.0 })
        .collect();
    let fit = fit_2pl(&dense(&scores, students, items), &FitConfig::default()).unwrap();
    let fitted = fitted_params(&fit);
    let rho_b = spearman(&truth.b, &fitted.b);
    let rho_a = spearman(&truth.a, &fitted.a);
    let elapsed = started.elapsed().as_secs_f64();
    let pass = rho_b > 0.9 && rho_a > 0.7 && elapsed < 120.0;
    assert!(verdict(
        "AC4",
        "dichotomous ordering",
        pass,
        &format!("spearman b {rho_b:.3}, spearman a {rho_a:.3}, {elapsed:.2}s")
    ));
}

#[test]
fn ac5_baker_bands() {
    use DiscriminationBand::*;
    let table = [
        (0.34, VeryLow),
        (0.35, Low),
        (0.64, Low),
        (0.65, Moderate),
        (1.34, Moderate),
        (1.35, High),
        (1.69, High),
        (1.70, VeryHigh),
    ];
    let wrong: Vec<_> = table
        .iter()
        .filter(|(a, band)| classify_discrimination(*a).ok() != Some(*band))
        .collect();
    assert!(verdict(
        "AC5",
        "Baker bands",
        wrong.is_empty(),
        &format!("{} of {} boundary values classified exactly", table.len() - wrong.len(), table.len())
    ));
}

#[test]
fn ac6_difficulty_ordering() {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 60..65 {
        let mut rng = rng(seed);
        let (students, items, variants) = (300, 6, 5);
        let truth = draw_params(&mut rng, items, students, (0.5, 2.0), (-2.0, 1.5));
        // A student's name either describes the function (with the item's
        // success probability) or not; generated functions pass 95% of the
        // time for a good name and 10% of the time for a poor one.
        let fractional: Vec<f64> = probability_matrix(&truth)
            .into_iter()
            .map(|p| {
                let pass = if rng.random_bool(p) { 0.95 } else { 0.10 };
                (0..variants).filter(|_| rng.random_bool(pass)).count() as f64 / variants as f64
            })
            .collect();
        let m = dense(&fractional, students, items);
        let soft = fit_2pl(&m, &FitConfig::default()).unwrap();
        let hard = fit_2pl(&m.thresholded(1.0), &FitConfig::default()).unwrap();
        let shifts: Vec<f64> = soft
            .items
            .items
            .iter()
            .zip(&hard.items.items)
            .map(|(s, h)| h.b - s.b)
            .collect();
        pass &= shifts.iter().all(|d| *d >= 0.0);
        let smallest = shifts.iter().copied().fold(f64::INFINITY, f64::min);
        lines.push(format!("{smallest:+.2}"));
    }
    assert!(verdict(
        "AC6",
        "difficulty ordering",
        pass,
        &format!("smallest per-item b shift after thresholding, 5 datasets x 6 items: {}", lines.join(" "))
    ));
}

fn response(name: &str, question: &str) -> StudentResponse {
    StudentResponse {
        student_id: "s1".into(),
        question_id: question.into(),
        attempt: 1,
        text: name.into(),
        timestamp: Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(),
    }
}

#[test]
fn ac7_grading_policies_offline() {
    let fixture = MockFixture::from_json(include_str!("fixtures/table1_mock.json")).unwrap();
    let client = fixture.client();
    let backend = fixture.backend().unwrap().unwrap();
    let cache = VariantCache::in_memory();
    let bank = eipl_core::bank::shipped_bank();
    let grader = Grader::new(
        Generator::new(&client, &cache).with_retry(RetryPolicy::no_delay(1)),
        &backend,
        GradingSettings::default(),
    );
    let relational = [
        ("count_odd_nums", "count-odd-nums"),
        ("get_values_under_threshold", "numbers-below-threshold"),
        ("make_values_absolute_in_place", "absolute-values"),
        ("count_strings_with_length_n", "count-strings-of-length"),
    ];
    let mut failures = Vec::new();
    for (name, qid) in relational {
        let q = bank.get(qid).unwrap();
        for policy in [GradingPolicy::OneAttempt, GradingPolicy::Robustness] {
            let o = grader.grade(policy, &response(name, qid), q).unwrap();
            if !(o.correct && o.partial_score == 1.0) {
                failures.push(format!("{name}/{policy}"));
            }
        }
    }
    let q = bank.get("count-strings-of-length").unwrap();
    let single = grader.grade_one_attempt(&response("count_strings", q.id.as_str()), q).unwrap();
    let robust = grader.grade_robustness(&response("count_strings", q.id.as_str()), q).unwrap();
    let marginal_ok = single.correct && !robust.correct && (robust.partial_score - 0.6).abs() < 1e-12;
    let pass = failures.is_empty() && marginal_ok;
    assert!(verdict(
        "AC7",
        "grading policies offline",
        pass,
        &format!(
            "relational failures {failures:?}; count_strings one-attempt correct={}, robustness correct={} partial={}",
            single.correct, robust.correct, robust.partial_score
        )
    ));
}

#[test]
fn ac8_validation() {
    let mut ok = true;
    let r = validate_function_name("count_odd_nums", 10);
    ok &= r.valid && r.word_count == 3;
    let r = validate_function_name("get_values_under_threshold", 10);
    ok &= r.valid && r.word_count == 4;
    ok &= validate_function_name("count odd numbers", 10).violations == [Violation::NotAnIdentifier];
    ok &= validate_function_name("class", 10).violations == [Violation::ReservedKeyword];
    let r = validate_function_name("a_b_c_d_e_f_g_h_i_j_k", 10);
    ok &= r.violations == [Violation::TooManyWords] && r.word_count == 11;
    let examples_ok = ok;

    let mut rng = rng(8);
    let keywords = [
        "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
        "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
        "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
    ];
    let alphabet: Vec<char> = "abcXYZ_019 \t".chars().collect();
    let mut property_ok = true;
    for _ in 0..2000 {
        let len = rng.random_range(1..16);
        let mut s: String = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        if !s.chars().any(char::is_whitespace) {
            s.insert(rng.random_range(0..=s.len()), ' ');
        }
        property_ok &= !validate_function_name(&s, 10).valid;
    }
    for kw in keywords {
        property_ok &= !validate_function_name(kw, 10).valid;
    }
    assert!(verdict(
        "AC8",
        "validation",
        examples_ok && property_ok,
        &format!("five named examples exact = {examples_ok}; whitespace/keyword property = {property_ok}")
    ));
}

#[test]
fn ac9_kappa() {
    use SoloCategory::*;
    let a = [Relational, Relational, Multistructural, OtherError];
    let b = [Relational, Multistructural, Multistructural, OtherError];
    let identical = cohens_kappa(&a, &a).unwrap() == 1.0;
    let worked = cohens_kappa(&a, &b).unwrap();
    let worked_ok = (worked - 7.0 / 11.0).abs() < 1e-9;

    let mut rng = rng(9);
    let mut relabel_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(5..60);
        let xs: Vec<SoloCategory> = (0..n).map(|_| *SoloCategory::ALL.choose(&mut rng).unwrap()).collect();
        let ys: Vec<SoloCategory> = xs
            .iter()
            .map(|&x| if rng.random_bool(0.6) { x } else { *SoloCategory::ALL.choose(&mut rng).unwrap() })
            .collect();
        let mut perm = SoloCategory::ALL;
        perm.shuffle(&mut rng);
        let map: HashMap<SoloCategory, SoloCategory> = SoloCategory::ALL.into_iter().zip(perm).collect();
        let px: Vec<_> = xs.iter().map(|x| map[x]).collect();
        let py: Vec<_> = ys.iter().map(|y| map[y]).collect();
        relabel_ok &= (cohens_kappa(&xs, &ys).unwrap() - cohens_kappa(&px, &py).unwrap()).abs() < 1e-12;
    }
    assert!(verdict(
        "AC9",
        "Cohen's kappa",
        identical && worked_ok && relabel_ok,
        &format!("identical = {identical}; worked example {worked:.12}; relabeling invariant = {relabel_ok}")
    ));
}
