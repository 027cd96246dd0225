use posthoc::admiss::{certify_c_admissible_binary, certify_u_admissible, lp_solve, CertifyOptions, LinearProgram, Sense, Verdict};
use posthoc::bayes::{bayes_posthoc_decision, bayes_risk, bayes_type1_risk, lambda_calibrated_decision, BayesProblem};
use posthoc::evar::{compatibilize, ev_mean, np_evariable, rao_blackwellize, sharpen, EVariable};
use posthoc::problem::{loss_span, FiniteDistribution, LossFamily, TestingProblem};
use posthoc::risk::{power_curve, risk_under_adversary, type1_risk, type2_risk, u_preference_margins, Adversary};
use posthoc::testfam::{
    binary_from_evariable, canonical_from_evariable, induced_evariable, np_posthoc_family, Mode, TestFamily,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEVELS: [f64; 7] = [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 8.0];

fn normalize(w: &[u32]) -> Vec<f64> {
    let s: u32 = w.iter().sum();
    w.iter().map(|&v| f64::from(v) / f64::from(s)).collect()
}

fn masses(n: usize, lo: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..8u32, n).prop_filter("positive total", |w| w.iter().any(|&v| v > 0)).prop_map(|w| normalize(&w))
}

fn loss_family(max_m: usize) -> impl Strategy<Value = LossFamily> + Clone {
    (prop::collection::vec(0..LEVELS.len(), 1..=max_m), prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0]), max_m))
        .prop_map(|(mut idx, l2)| {
            idx.sort_unstable();
            let mut t1: Vec<f64> = idx.iter().map(|&i| LEVELS[i]).collect();
            if let Some(last) = t1.last_mut() {
                if *last <= 1.0 {
                    *last = 2.0;
                }
            }
            let m = t1.len();
            LossFamily::from_losses(t1, l2[..m].to_vec()).unwrap()
        })
}

fn build(p: Vec<f64>, q: Vec<f64>, l: LossFamily) -> TestingProblem {
    TestingProblem::new(FiniteDistribution::from_masses(p).unwrap(), FiniteDistribution::from_masses(q).unwrap(), l).unwrap()
}

fn problem_with(max_n: usize, losses: impl Strategy<Value = LossFamily> + Clone + 'static, positive_p: bool) -> impl Strategy<Value = TestingProblem> {
    (2..=max_n).prop_flat_map(move |n| (masses(n, u32::from(positive_p)), masses(n, 0), losses.clone())).prop_map(|(p, q, l)| build(p, q, l))
}

fn problem(max_n: usize, max_m: usize, positive_p: bool) -> impl Strategy<Value = TestingProblem> {
    problem_with(max_n, loss_family(max_m), positive_p)
}

/// An e-variable with null mean `scale`, or zero when the raw weights vanish under `P`.
fn scaled(p: &TestingProblem, raw: &[u32], scale: f64) -> EVariable {
    let raw: Vec<f64> = raw.iter().map(|&v| f64::from(v)).collect();
    let mean: f64 = raw.iter().zip(p.null().mass()).map(|(v, m)| v * m).sum();
    let values = if mean > 0.0 { raw.iter().map(|v| v * scale / mean).collect() } else { vec![0.0; raw.len()] };
    EVariable::new(values).unwrap()
}

fn with_e(problems: impl Strategy<Value = TestingProblem>) -> impl Strategy<Value = (TestingProblem, EVariable)> {
    problems
        .prop_flat_map(|p| {
            let n = p.len();
            (Just(p), prop::collection::vec(0u32..10, n), prop::sample::select(vec![0.5, 0.8, 1.0]))
        })
        .prop_map(|(p, raw, s)| {
            let e = scaled(&p, &raw, s);
            (p, e)
        })
}

/// Class labels that refine the likelihood-ratio partition, so the statistic is sufficient.
fn sufficient_labels(p: &TestingProblem, split: &[u8]) -> Vec<(usize, u8)> {
    let mut labels = vec![(0, 0); p.len()];
    for (g, group) in p.lr_groups().iter().enumerate() {
        for &x in group {
            labels[x] = (g, split[x]);
        }
    }
    labels
}

fn all_maps(n: usize, m: usize) -> Vec<Adversary> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let choice = (0..n)
                .map(|_| {
                    let b = code % m;
                    code /= m;
                    b
                })
                .collect();
            Adversary::new(choice, m).unwrap()
        })
        .collect()
}

fn random_family(n: usize, m: usize, entries: &[u8]) -> TestFamily {
    let matrix = (0..n).map(|x| (0..m).map(|b| f64::from(entries[x * m + b]) / 4.0).collect()).collect();
    TestFamily::new(Mode::Randomized, matrix).unwrap()
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn likelihood_ratio_has_unit_null_mean(p in problem(6, 3, true)) {
        let mean: f64 = p.lr().iter().zip(p.null().mass()).map(|(l, m)| l * m).sum();
        prop_assert!((mean - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn higher_likelihood_ratio_sets_carry_more_alternative_mass(
        (p, cut, picks) in problem(6, 1, true).prop_flat_map(|p| {
            let (g, n) = (p.lr_groups().len(), p.len());
            (Just(p), 1..g.max(2), prop::collection::vec(any::<bool>(), n))
        })
    ) {
        let groups = p.lr_groups();
        prop_assume!(cut < groups.len());
        let (pm, qm) = (p.null().mass(), p.alt().mass());
        let low: Vec<usize> = groups[..cut].iter().flatten().copied().filter(|&x| picks[x]).collect();
        let high: Vec<usize> = groups[cut..].iter().flatten().copied().filter(|&x| picks[x]).collect();
        let mass = |set: &[usize], m: &[f64]| set.iter().map(|&x| m[x]).sum::<f64>();
        // Order the sides so that the lower-ratio set has the smaller null mass.
        let (a1, a2) = if mass(&low, pm) <= mass(&high, pm) { (low, high) } else {
            // A lower-ratio set with more null mass falls outside the lemma;
            // keep only a prefix of it that fits.
            let budget = mass(&high, pm);
            let mut kept = vec![];
            let mut used = 0.0;
            for &x in low.iter().rev() {
                if used + pm[x] <= budget {
                    used += pm[x];
                    kept.push(x);
                }
            }
            (kept, high)
        };
        prop_assume!(!a1.is_empty() && !a2.is_empty());
        let (p1, p2) = (mass(&a1, pm), mass(&a2, pm));
        let (q1, q2) = (mass(&a1, qm), mass(&a2, qm));
        prop_assert!(q1 < q2);
        prop_assert!(q1 / q2 < p1 / p2);
    }

    #[test]
    fn loss_span_depends_only_on_the_loss_values(l in loss_family(6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let m = l.len();
        let order: Vec<usize> = perm.into_iter().filter(|&i| i < m).collect();
        let shuffled = LossFamily::from_losses(l.type1().to_vec(), order.iter().map(|&i| l.type2()[i]).collect()).unwrap();
        let mut expected: Vec<f64> = l.type1().to_vec();
        expected.dedup();
        prop_assert_eq!(loss_span(&l), expected.clone());
        prop_assert_eq!(loss_span(&shuffled), expected);
    }

    #[test]
    fn rao_blackwell_preserves_null_mean(
        (p, e, split) in with_e(problem(6, 3, true)).prop_flat_map(|(p, e)| { let n = p.len(); (Just(p), Just(e), prop::collection::vec(0u8..2, n)) })
    ) {
        let labels = sufficient_labels(&p, &split);
        let s = rao_blackwellize(&e, &labels, &p).unwrap();
        prop_assert!((ev_mean(&s, p.null()).unwrap() - ev_mean(&e, p.null()).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn rao_blackwell_improves_concave_functionals(
        (p, e, split) in with_e(problem(6, 3, true)).prop_flat_map(|(p, e)| { let n = p.len(); (Just(p), Just(e), prop::collection::vec(0u8..3, n)) })
    ) {
        let s = rao_blackwellize(&e, &sufficient_labels(&p, &split), &p).unwrap();
        let eq = |f: &dyn Fn(f64) -> f64, v: &EVariable| -> f64 { v.values().iter().zip(p.alt().mass()).map(|(x, q)| q * f(*x)).sum() };
        let mut fs: Vec<Box<dyn Fn(f64) -> f64>> = vec![Box::new(f64::sqrt), Box::new(f64::ln_1p)];
        for &c in p.losses().type1() {
            fs.push(Box::new(move |v: f64| (v / c).min(1.0)));
        }
        for f in &fs {
            prop_assert!(eq(f.as_ref(), &s) >= eq(f.as_ref(), &e) - 1e-9);
        }
    }

    #[test]
    fn sharpen_dominates_and_compatibilize_lands_on_the_span((p, e) in with_e(problem(6, 4, false))) {
        for capped in [false, true] {
            let s = sharpen(&e, &p, capped);
            prop_assert!(s.values().iter().zip(e.values()).all(|(a, b)| a >= b));
        }
        let span = loss_span(p.losses());
        let c = compatibilize(&e, &p);
        let min_loss = span[0];
        for &v in c.values() {
            prop_assert!(v == 0.0 || span.contains(&v), "value {} is off the span {:?}", v, span);
            prop_assert!(!(v > 0.0 && v < min_loss));
        }
        prop_assert!(ev_mean(&c, p.null()).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn neyman_pearson_evariables_are_sharp(p in problem(6, 4, false)) {
        for &b in p.losses().scenarios() {
            let e = np_evariable(&p, b).unwrap();
            prop_assert!((ev_mean(&e, p.null()).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn randomized_round_trip((p, e) in with_e(problem(6, 4, false))) {
        let cap = p.losses().max_type1();
        let clipped = EVariable::new(e.values().iter().map(|v| v.min(cap)).collect()).unwrap();
        let back = induced_evariable(&canonical_from_evariable(&clipped, &p).unwrap(), p.losses()).unwrap();
        for (a, b) in back.values().iter().zip(clipped.values()) {
            prop_assert!(rel_close(*a, *b), "{} vs {}", a, b);
        }
    }

    #[test]
    fn binary_round_trip((p, e) in with_e(problem(6, 4, false))) {
        let c = compatibilize(&e, &p);
        let back = induced_evariable(&binary_from_evariable(&c, &p).unwrap(), p.losses()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn canonical_families_are_monotone(
        (p, steps) in problem(6, 4, false).prop_flat_map(|p| { let g = p.lr_groups().len(); (Just(p), prop::collection::vec(0u32..4, g)) })
    ) {
        let mut level = vec![0.0; p.len()];
        let mut acc = 0.0;
        for (group, step) in p.lr_groups().iter().zip(&steps) {
            acc += f64::from(*step) * 0.75;
            for &x in group {
                level[x] = acc;
            }
        }
        let e = EVariable::new(level).unwrap();
        for t in [canonical_from_evariable(&e, &p).unwrap(), binary_from_evariable(&e, &p).unwrap()] {
            for x in 0..p.len() {
                prop_assert!(t.row(x).windows(2).all(|w| w[0] >= w[1]));
            }
            for b in 0..p.losses().len() {
                let mut prev = f64::NEG_INFINITY;
                for group in p.lr_groups() {
                    let vals: Vec<f64> = group.iter().map(|&x| t.entry(x, b)).collect();
                    prop_assert!(vals.iter().all(|v| *v >= prev));
                    prev = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                }
            }
        }
    }

    #[test]
    fn single_loss_recovers_the_classical_test(
        (p, k) in problem(6, 1, true).prop_flat_map(|p| { let g = p.lr_groups().len(); (Just(p), 1..g.max(2)) })
    ) {
        let groups = p.lr_groups();
        prop_assume!(k < groups.len());
        let threshold = p.lr()[groups[k][0]];
        let alpha: f64 = (0..p.len()).filter(|&x| p.lr()[x] >= threshold * (1.0 - 1e-12)).map(|x| p.null().mass()[x]).sum();
        prop_assume!(alpha < 1.0 - 1e-9);
        let p = p.with_losses(LossFamily::new(vec![1.0], vec![1.0 / alpha], vec![1.0]).unwrap());
        let t = binary_from_evariable(&np_evariable(&p, 1.0).unwrap(), &p).unwrap();
        for x in 0..p.len() {
            prop_assert_eq!(t.entry(x, 0) == 1.0, p.lr()[x] >= threshold * (1.0 - 1e-12));
        }
        let size: f64 = (0..p.len()).map(|x| p.null().mass()[x] * t.entry(x, 0)).sum();
        prop_assert!((size - alpha).abs() <= 1e-12);
    }

    #[test]
    fn canonical_family_clips_large_values(
        ((p, e), pick) in (with_e(problem(6, 4, true)), any::<prop::sample::Index>())
    ) {
        let x = pick.index(p.len());
        let mut values = e.into_values();
        values[x] = p.losses().max_type1() + 1.0;
        let e = EVariable::new(values).unwrap();
        let back = induced_evariable(&canonical_from_evariable(&e, &p).unwrap(), p.losses()).unwrap();
        prop_assert!(back.values()[x] < e.values()[x]);
        prop_assert_eq!(back.values()[x], p.losses().max_type1());
    }

    #[test]
    fn worst_case_risk_dominates_every_adversary(
        ((p, e), seed) in (with_e(problem(6, 4, false)), any::<u64>())
    ) {
        let t = canonical_from_evariable(&e, &p).unwrap();
        let worst = type1_risk(&t, &p).unwrap().type1_risk;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = p.losses().len();
        for _ in 0..1000 {
            let a = Adversary::new((0..p.len()).map(|_| rng.gen_range(0..m)).collect(), m).unwrap();
            prop_assert!(risk_under_adversary(&t, &a, &p).unwrap() <= worst);
        }
    }

    #[test]
    fn worst_case_risk_matches_enumeration(
        (p, entries) in problem(5, 3, false).prop_flat_map(|p| { let c = p.len() * p.losses().len(); (Just(p), prop::collection::vec(0u8..5, c)) })
    ) {
        let t = random_family(p.len(), p.losses().len(), &entries);
        let best = all_maps(p.len(), p.losses().len())
            .iter()
            .map(|a| risk_under_adversary(&t, a, &p).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(type1_risk(&t, &p).unwrap().type1_risk, best);
    }

    #[test]
    fn grid_losses_price_every_level((p, e) in with_e(problem_with(6, Just(LossFamily::linear_grid(100).unwrap()), false))) {
        let e = EVariable::new(e.values().iter().map(|v| v * 150.0).collect()).unwrap();
        let t = canonical_from_evariable(&e, &p).unwrap();
        let direct: f64 = e.values().iter().zip(p.null().mass()).map(|(v, m)| m * v.min(100.0)).sum();
        prop_assert!(rel_close(type1_risk(&t, &p).unwrap().type1_risk, direct));
    }

    #[test]
    fn margins_match_enumeration(
        (p, a, b) in problem(4, 3, false).prop_flat_map(|p| {
            let c = p.len() * p.losses().len();
            (Just(p), prop::collection::vec(0u8..5, c), prop::collection::vec(0u8..5, c))
        })
    ) {
        let (n, m) = (p.len(), p.losses().len());
        let (phi, delta) = (random_family(n, m, &a), random_family(n, m, &b));
        let diffs: Vec<f64> = all_maps(n, m)
            .iter()
            .map(|adv| {
                type2_risk(&delta, adv, p.alt(), p.losses()).unwrap() - type2_risk(&phi, adv, p.alt(), p.losses()).unwrap()
            })
            .collect();
        let (weak, strict) = u_preference_margins(&phi, &delta, p.alt(), p.losses()).unwrap();
        let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((weak - lo).abs() <= 1e-12 && (strict - hi).abs() <= 1e-12);
    }
}

fn independent_u_check(phi: &TestFamily, t: &TestFamily, p: &TestingProblem) -> bool {
    let safe = type1_risk(phi, p).unwrap().type1_risk <= 1.0 + 1e-9;
    let (weak, strict) = u_preference_margins(phi, t, p.alt(), p.losses()).unwrap();
    safe && weak >= -1e-9 && strict > 1e-7
}

/// Best strictly preferable binary competitor under constant adversaries, by brute force.
fn brute_force_binary(t: &TestFamily, p: &TestingProblem) -> Option<f64> {
    let (n, m) = (p.len(), p.losses().len());
    let base = power_curve(t, p.alt()).unwrap();
    let (pm, qm, l1) = (p.null().mass(), p.alt().mass(), p.losses().type1());
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << (n * m)) {
        let on = |x: usize, b: usize| mask & (1 << (x * m + b)) != 0;
        let mut risk = 0.0;
        for x in 0..n {
            let worst = (0..m).filter(|&b| on(x, b)).map(|b| l1[b]).fold(0.0, f64::max);
            risk += pm[x] * worst;
        }
        if risk > 1.0 + 1e-9 {
            continue;
        }
        let gains: Vec<f64> = (0..m).map(|b| (0..n).filter(|&x| on(x, b)).map(|x| qm[x]).sum::<f64>() - base[b]).collect();
        let total: f64 = gains.iter().sum();
        if gains.iter().all(|g| *g >= -1e-9) && total > 1e-7 {
            best = Some(best.map_or(total, |v: f64| v.max(total)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn u_counterexamples_are_sound((p, e) in with_e(problem(6, 4, false))) {
        let t = canonical_from_evariable(&e, &p).unwrap();
        let cert = certify_u_admissible(&t, &p, CertifyOptions::default()).unwrap();
        if let Some(phi) = &cert.counterexample {
            prop_assert_eq!(cert.verdict, Verdict::Inadmissible);
            prop_assert!(independent_u_check(phi, &t, &p));
        }
    }

    #[test]
    fn u_verdicts_under_grid_losses((p, e) in with_e(problem_with(6, Just(LossFamily::linear_grid(100).unwrap()), true))) {
        let t = canonical_from_evariable(&e, &p).unwrap();
        let cert = certify_u_admissible(&t, &p, CertifyOptions::default()).unwrap();
        let sharp = (ev_mean(&e, p.null()).unwrap() - 1.0).abs() <= 1e-9;
        prop_assert_eq!(cert.verdict == Verdict::Admissible, sharp);
        if !sharp {
            prop_assert_eq!(cert.verdict, Verdict::Inadmissible);
            let phi = canonical_from_evariable(&sharpen(&e, &p, true), &p).unwrap();
            prop_assert!(independent_u_check(&phi, &t, &p));
        }
    }

    #[test]
    fn c_binary_verdicts_agree_with_brute_force(
        ((p, e), flips) in (with_e(problem(4, 3, false)), prop::collection::vec(any::<bool>(), 12))
    ) {
        let base = binary_from_evariable(&compatibilize(&e, &p), &p).unwrap();
        let (n, m) = (p.len(), p.losses().len());
        let t = if flips[0] {
            let matrix = (0..n).map(|x| (0..m).map(|b| if flips[(x * m + b) % 12] { 1.0 - base.entry(x, b) } else { base.entry(x, b) }).collect()).collect();
            TestFamily::new(Mode::Binary, matrix).unwrap()
        } else {
            base
        };
        let cert = certify_c_admissible_binary(&t, &p, CertifyOptions::default()).unwrap();
        let brute = brute_force_binary(&t, &p);
        let safe = type1_risk(&t, &p).unwrap().type1_risk <= 1.0 + 1e-9;
        if safe {
            prop_assert_eq!(cert.verdict == Verdict::Admissible, brute.is_none(), "{:?}", cert);
        }
        if let Some(phi) = &cert.counterexample {
            prop_assert!(type1_risk(phi, &p).unwrap().type1_risk <= 1.0 + 1e-9);
            let (a, b) = (power_curve(phi, p.alt()).unwrap(), power_curve(&t, p.alt()).unwrap());
            prop_assert!(a.iter().zip(&b).all(|(x, y)| x - y >= -1e-9));
            prop_assert!(a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() > 1e-7);
        }
    }

    #[test]
    fn neyman_pearson_family_is_unique_among_preferable_competitors(
        (p, k, others) in problem(5, 1, true).prop_flat_map(|p| {
            let g = p.lr_groups().len();
            (Just(p), 1..g.max(2), prop::collection::vec(0..LEVELS.len(), 0..3))
        })
    ) {
        let groups = p.lr_groups();
        prop_assume!(k < groups.len());
        let threshold = p.lr()[groups[k][0]];
        let alpha: f64 = (0..p.len()).filter(|&x| p.lr()[x] >= threshold * (1.0 - 1e-12)).map(|x| p.null().mass()[x]).sum();
        prop_assume!(alpha < 1.0 - 1e-9);
        let star = 1.0 / alpha;
        let mut type1: Vec<f64> = others.iter().map(|&i| LEVELS[i]).filter(|l| (l - star).abs() > 1e-9).collect();
        type1.push(star);
        type1.sort_by(f64::total_cmp);
        let b_star = (type1.iter().position(|l| *l == star).unwrap() + 1) as f64;
        let m = type1.len();
        let p = p.with_losses(LossFamily::from_losses(type1.clone(), vec![1.0; m]).unwrap());
        let np = np_posthoc_family(&p, b_star, Mode::Randomized).unwrap();
        let n = p.len();
        let (pm, qm) = (p.null().mass(), p.alt().mass());
        let var = |x: usize, b: usize| x * m + b;
        let cols = n * m + n;
        let powers = power_curve(&np, p.alt()).unwrap();
        // Deviation from the family is linear in each entry once the direction
        // at fractional entries is fixed, so both directions are maximized.
        for direction in [1.0, -1.0] {
            let mut objective = vec![0.0; cols];
            let mut offset = 0.0;
            for x in 0..n {
                for b in 0..m {
                    let v = np.entry(x, b);
                    let sign = if v == 0.0 { 1.0 } else if v == 1.0 { -1.0 } else { direction };
                    objective[var(x, b)] = sign * pm[x];
                    offset -= sign * pm[x] * v;
                }
            }
            let mut lp = LinearProgram::unit_box(objective);
            for x in 0..n {
                lp.upper[n * m + x] = type1[m - 1];
                for b in 0..m {
                    let mut row = vec![0.0; cols];
                    row[var(x, b)] = type1[b];
                    row[n * m + x] = -1.0;
                    lp.push(row, Sense::Le, 0.0);
                }
            }
            let mut budget = vec![0.0; cols];
            for x in 0..n {
                budget[n * m + x] = pm[x];
            }
            lp.push(budget, Sense::Le, 1.0);
            for b in 0..m {
                let mut row = vec![0.0; cols];
                for x in 0..n {
                    row[var(x, b)] = qm[x];
                }
                lp.push(row, Sense::Ge, powers[b] - 1e-12);
            }
            let sol = lp_solve(&lp).unwrap();
            prop_assert!(sol.value + offset <= 1e-7, "deviation {}", sol.value + offset);
        }
    }
}

fn bayes_instance() -> impl Strategy<Value = BayesProblem> {
    (2usize..=4, 2usize..=3, 1usize..=2)
        .prop_flat_map(|(n, k, m)| {
            (
                prop::collection::vec(masses(n, 0), k),
                masses(k, 1),
                1..k,
                prop::collection::vec(prop::sample::select(vec![1.5, 2.0, 4.0, 8.0]), m),
                prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 3.0]), m),
            )
        })
        .prop_map(|(likelihood, prior, null_count, mut l1, l2)| {
            l1.sort_by(f64::total_cmp);
            let k = prior.len();
            BayesProblem::new(
                (0..k).map(|i| format!("t{i}")).collect(),
                (0..null_count).collect(),
                prior,
                likelihood,
                LossFamily::from_losses(l1, l2).unwrap(),
            )
            .unwrap()
        })
}

/// Bayes risk summed directly over parameters and points.
fn direct_bayes_risk(bp: &BayesProblem, rule: &[f64], a: &Adversary) -> f64 {
    let mut total = 0.0;
    for (t, row) in bp.likelihood.iter().enumerate() {
        for (x, px) in row.iter().enumerate() {
            let b = a.choice[x];
            let loss = if bp.theta0.contains(&t) { bp.losses.type1()[b] * rule[x] } else { bp.losses.type2()[b] * (1.0 - rule[x]) };
            total += bp.prior[t] * px * loss;
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bayes_decision_minimizes_bayes_risk_for_every_map(bp in bayes_instance()) {
        let n = bp.n_points();
        prop_assume!((0..n).all(|x| bp.likelihood.iter().zip(&bp.prior).any(|(r, w)| r[x] * w > 0.0)));
        for a in all_maps(n, bp.losses.len()) {
            let best = bayes_posthoc_decision(&bp, &a).unwrap();
            let value = bayes_risk(&bp, &best, &a).unwrap();
            prop_assert!(rel_close(value, direct_bayes_risk(&bp, &best, &a)));
            for mask in 0u32..(1 << n) {
                let rule: Vec<f64> = (0..n).map(|x| f64::from(mask >> x & 1)).collect();
                prop_assert!(value <= direct_bayes_risk(&bp, &rule, &a) + 1e-12);
            }
        }
    }

    #[test]
    fn calibrated_rule_is_safe(bp in bayes_instance()) {
        if let Ok((_, fam)) = lambda_calibrated_decision(&bp, 1e-6) {
            prop_assert!(bayes_type1_risk(&bp, &fam).unwrap() <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn single_null_bayes_risk_is_frequentist((p, e) in with_e(problem(6, 4, false)), prior_null in 0.1f64..1.0) {
        let bp = BayesProblem::point_hypotheses(&p, prior_null).unwrap();
        let t = canonical_from_evariable(&e, &p).unwrap();
        prop_assert!((bayes_type1_risk(&bp, &t).unwrap() - type1_risk(&t, &p).unwrap().type1_risk).abs() <= 1e-12);
    }
}
