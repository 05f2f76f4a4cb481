//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::time::{Duration, Instant};

use ehrhart_core::ehrhart::{jumps, lifting, step_function, FacetCounter};
use ehrhart_core::exactmath::{ceil_rat, floor_rat, fmt_rat, is_integer, rat, Rat};
use ehrhart_core::harness::{
    brute_ppyr_step, check_translates_distinct, codim1_reconstruction_demo, envelope_fit,
    find_translation_witness, generate, projected_normals, rvol_limit_check, InstanceSpec,
};
use ehrhart_core::polytope::FacetKind;
use ehrhart_core::reconstruct::{
    gcd_sequence_period, pseudo_diophantine_solve, recover, HiddenOracle, ReconConfig,
};
use ehrhart_core::HPolytope;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUITE_SEED: u64 = 2024;
const SUITE_PER_DIM: usize = 100;
const ENVELOPE_BUDGET: u64 = 200_000_000;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn poly(d: usize, rows: &[(&[i64], (i64, i64))]) -> HPolytope {
    HPolytope::from_i64(d, rows).unwrap()
}

fn square() -> HPolytope {
    HPolytope::cube(&[rat(2, 3), rat(0, 1)], &[rat(1, 1), rat(1, 3)]).unwrap()
}

fn suite() -> Vec<HPolytope> {
    let mut v = generate(&InstanceSpec::new(2, SUITE_PER_DIM, SUITE_SEED));
    v.extend(generate(&InstanceSpec::new(3, SUITE_PER_DIM, SUITE_SEED)));
    v
}

fn closed_form(s: &Rat) -> i64 {
    let x: num_bigint::BigInt = floor_rat(s) - ceil_rat(&(s * rat(2, 3))) + 1;
    let y: num_bigint::BigInt = floor_rat(&(s / rat(3, 1))) + 1;
    let x = x.to_i64().unwrap().max(0);
    x * y.to_i64().unwrap()
}

fn c1_worked_example() -> Outcome {
    let f = step_function(&square(), &rat(7, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = Vec::new();
    for _ in 0..50 {
        let den = rng.gen_range(1..=60);
        let num = rng.gen_range(1..=7 * den / 2);
        let s = rat(num, den);
        if f.eval(&s) != closed_form(&s) {
            bad.push(fmt_rat(&s));
        }
    }
    let bps: Vec<Rat> = f.breaks.iter().map(|b| b.s.clone()).collect();
    let bps_ok = bps == vec![rat(1, 1), rat(3, 2), rat(2, 1), rat(3, 1)];
    let pair = |s: Rat| f.breaks.iter().find(|b| b.s == s).map(|b| (b.at, b.after));
    let pairs_ok = pair(rat(1, 1)) == Some((1, 1)) && pair(rat(2, 1)) == Some((1, 1));
    let j3 = jumps(&f).into_iter().find(|r| r.s0 == rat(3, 1));
    let j3_ok = j3.is_some_and(|r| (r.left_jump, r.right_jump) == (3, 2));
    outcome(
        bad.is_empty() && bps_ok && pairs_ok && j3_ok,
        format!(
            "closed-form mismatches {:?}, breakpoints {:?}, pairs at 1 and 2 {}, jumps at 3 {}",
            bad,
            bps.iter().map(fmt_rat).collect::<Vec<_>>(),
            pairs_ok,
            j3_ok
        ),
    )
}

fn c2_jumps(ps: &[HPolytope]) -> Outcome {
    let s_max = rat(10, 1);
    let (mut checked, mut bad) = (0usize, Vec::new());
    for (i, p) in ps.iter().enumerate() {
        let f = step_function(p, &s_max).unwrap();
        let fc = FacetCounter::new(p).unwrap();
        for r in jumps(&f) {
            checked += 1;
            let front = fc.count(&r.s0, FacetKind::Front).unwrap() as i64;
            let back = fc.count(&r.s0, FacetKind::Back).unwrap() as i64;
            if (front, back) != (r.left_jump, r.right_jump) {
                bad.push(format!("#{i} at {}", fmt_rat(&r.s0)));
            }
        }
    }
    outcome(bad.is_empty(), format!("{checked} breakpoints, mismatches {bad:?}"))
}

fn c3_lifting(ps: &[HPolytope]) -> Outcome {
    let s_max = rat(10, 1);
    let bad: Vec<usize> = (0..ps.len())
        .filter(|&i| {
            let lifted = lifting(&step_function(&ps[i], &s_max).unwrap());
            lifted != brute_ppyr_step(&ps[i], &s_max).unwrap()
        })
        .collect();
    outcome(bad.is_empty(), format!("{} instances, mismatches {bad:?}", ps.len()))
}

fn c4_decomposition(ps: &[HPolytope]) -> Outcome {
    let bad: Vec<usize> = (0..ps.len())
        .filter(|&i| {
            let v = ps[i].ppyr_volume().unwrap();
            v.decomposition != v.hull
        })
        .collect();
    let b = HPolytope::cube(&[rat(1, 1), rat(0, 1)], &[rat(2, 1), rat(1, 1)]).unwrap();
    let v = b.ppyr_volume().unwrap();
    let box_ok = v.decomposition == rat(3, 2) && v.hull == rat(3, 2);
    outcome(
        bad.is_empty() && box_ok,
        format!("mismatches {bad:?}, [1,2]x[0,1] gives {}", fmt_rat(&v.decomposition)),
    )
}

fn c5_translates(ps: &[HPolytope]) -> Outcome {
    let mut bad = Vec::new();
    let mut pairs = 0;
    for (i, p) in ps.iter().enumerate() {
        let w = find_translation_witness(p).unwrap();
        let r = check_translates_distinct(p, &w, 5, &rat(2, 1)).unwrap();
        pairs += r.pairs.len();
        if !r.passed() || r.pairs.len() != 15 {
            bad.push(i);
        }
    }
    outcome(bad.is_empty(), format!("{pairs} pairs compared, failing instances {bad:?}"))
}

fn c6_rvol() -> Outcome {
    let f = poly(2, &[(&[1, 0], (1, 1)), (&[-1, 0], (-1, 1)), (&[0, 1], (1, 1)), (&[0, -1], (0, 1))]);
    let g = poly(2, &[(&[1, 1], (1, 1)), (&[-1, -1], (-1, 1)), (&[-1, 0], (0, 1)), (&[0, -1], (0, 1))]);
    let grid: Vec<Rat> = (1..=40).map(|s| rat(s, 1)).collect();
    let zero = [rat(0, 1), rat(0, 1)];
    let exact = [&f, &g].iter().all(|p| {
        rvol_limit_check(p, &zero, &grid)
            .unwrap()
            .iter()
            .all(|(s, dev)| *dev == Rat::from_integer(1.into()) / s)
    });
    let mut ps = generate(&InstanceSpec::new(2, 20, 6));
    ps.extend(generate(&InstanceSpec::new(3, 10, 6)));
    let mut bad = Vec::new();
    let mut worst = 0f64;
    for (i, p) in ps.iter().enumerate() {
        let fit = envelope_fit(p, ENVELOPE_BUDGET).unwrap();
        if !fit.passed {
            bad.push(i);
        }
        if fit.c.0.is_positive() {
            let ratio = (&fit.dev_at_40.0 * rat(40, 1) / &fit.c.0).to_f64().unwrap();
            worst = worst.max(ratio);
        }
    }
    outcome(
        exact && bad.is_empty(),
        format!("segments exact {exact}, envelope failures {bad:?}, worst 40*dev/C {worst:.3}"),
    )
}

fn c7_reconstruction() -> Outcome {
    let mut hidden = vec![
        square(),
        poly(
            3,
            &[(&[-1, 0, 0], (-1, 2)), (&[0, -1, 0], (-1, 3)), (&[0, 0, -1], (-1, 4)), (&[1, 1, 1], (2, 1))],
        ),
        // redundant normals touching a vertex
        poly(
            2,
            &[(&[1, 0], (1, 1)), (&[0, 1], (1, 1)), (&[-1, 0], (0, 1)), (&[0, -1], (0, 1)), (&[1, 1], (2, 1))],
        ),
        poly(
            3,
            &[
                (&[1, 0, 0], (1, 1)),
                (&[0, 1, 0], (1, 2)),
                (&[0, 0, 1], (2, 3)),
                (&[-1, 0, 0], (0, 1)),
                (&[0, -1, 0], (0, 1)),
                (&[0, 0, -1], (0, 1)),
                (&[1, 1, 1], (13, 6)),
            ],
        ),
    ];
    hidden.extend(generate(&InstanceSpec::new(2, 12, 11)));
    hidden.extend(generate(&InstanceSpec::new(3, 5, 11)));
    let config = ReconConfig::default();
    let mut bad = Vec::new();
    let (mut longest_len, mut longest_time) = (rat(0, 1), Duration::ZERO);
    for (i, p) in hidden.iter().enumerate() {
        let start = Instant::now();
        let normals = p.normals();
        let expected: Vec<Rat> = normals.iter().map(|a| p.support(a)).collect();
        let rep = recover(&HiddenOracle::new(p.clone()), &normals, &config).unwrap();
        let t = start.elapsed();
        let ok = rep.passed()
            && rep.b_vector().as_ref() == Some(&expected)
            && rep.total_window_length <= rat(500, 1)
            && t <= Duration::from_secs(120);
        if !ok {
            bad.push(i);
        }
        longest_len = longest_len.max(rep.total_window_length.clone());
        longest_time = longest_time.max(t);
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} instances, failures {bad:?}, max window length {:.2}, max time {:.1}s",
            hidden.len(),
            longest_len.to_f64().unwrap(),
            longest_time.as_secs_f64()
        ),
    )
}

fn c8_pseudo_diophantine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = Vec::new();
    let mut built = 0;
    while built < 50 {
        let den = rng.gen_range(1..=12);
        let b = rat(rng.gen_range(-4 * den..=4 * den), den);
        let c = rat(rng.gen_range(1..=4), 1);
        let mut eqs = Vec::new();
        let mut ks: Vec<i64> = Vec::new();
        while eqs.len() < 3 {
            let k = rng.gen_range(10..=120);
            if ks.contains(&k) {
                continue;
            }
            let t = &b + &c * rat(k, 1);
            // s just above an integer n, with s t an integer
            let n = rng.gen_range(1..=3);
            let m = floor_rat(&(&t * rat(n, 1))) + 1;
            let s = Rat::from_integer(m) / &t;
            if is_integer(&s) {
                continue;
            }
            ks.push(k);
            eqs.push((s, k));
        }
        built += 1;
        match pseudo_diophantine_solve(&eqs, &c, (&rat(-8, 1), &rat(8, 1), 12)) {
            Ok(sol) if sol == vec![b.clone()] => {}
            other => bad.push(format!("b = {}: {:?}", fmt_rat(&b), other.map(|v| v.len()))),
        }
    }
    outcome(bad.is_empty(), format!("{built} systems, failures {bad:?}"))
}

fn c9_gcd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut done = 0;
    let mut bad = Vec::new();
    while done < 100 {
        let q: [i64; 4] = std::array::from_fn(|_| rng.gen_range(-40..=40));
        let [z, g, x, e] = q;
        if z * e - g * x == 0 {
            continue;
        }
        done += 1;
        let (p, prof) = gcd_sequence_period(z, g, x, e).unwrap();
        let ok = (1..=10 * p as i64).all(|k| {
            num_integer::gcd(z * k + g, x * k + e) == prof[((k - 1) as u64 % p) as usize]
        });
        if !ok {
            bad.push(q);
        }
    }
    outcome(bad.is_empty(), format!("{done} quadruples, failures {bad:?}"))
}

fn c10_codim1() -> Outcome {
    let seg = |y: (i64, i64), lo: (i64, i64), hi: (i64, i64)| {
        let (ny, dy) = y;
        poly(2, &[(&[0, 1], (ny, dy)), (&[0, -1], (-ny, dy)), (&[1, 0], hi), (&[-1, 0], (-lo.0, lo.1))])
    };
    let cases = vec![
        seg((1, 2), (0, 1), (1, 1)),
        seg((1, 1), (1, 3), (2, 1)),
        seg((1, 4), (0, 1), (3, 2)),
        seg((3, 4), (-1, 2), (1, 1)),
        seg((1, 3), (1, 2), (5, 2)),
        seg((0, 1), (1, 1), (2, 1)),
        seg((3, 2), (-1, 1), (1, 3)),
        poly(2, &[(&[1, 0], (3, 4)), (&[-1, 0], (-3, 4)), (&[0, 1], (1, 1)), (&[0, -1], (-1, 4))]),
        poly(2, &[(&[1, 1], (1, 1)), (&[-1, -1], (-1, 1)), (&[-1, 0], (0, 1)), (&[0, -1], (0, 1))]),
        poly(
            3,
            &[
                (&[0, 0, 1], (1, 3)),
                (&[0, 0, -1], (-1, 3)),
                (&[1, 0, 0], (1, 1)),
                (&[-1, 0, 0], (0, 1)),
                (&[0, 1, 0], (1, 1)),
                (&[0, -1, 0], (0, 1)),
            ],
        ),
    ];
    let config = ReconConfig::default();
    let mut bad = Vec::new();
    let mut longest = Duration::ZERO;
    for (i, p) in cases.iter().enumerate() {
        let start = Instant::now();
        let normals = projected_normals(p).unwrap();
        let r = codim1_reconstruction_demo(p, &normals, &config).unwrap();
        let t = start.elapsed();
        longest = longest.max(t);
        let same = r.lifted.as_ref().is_some_and(|q| {
            let (mut v1, mut v2) = (q.vertices().to_vec(), p.vertices().to_vec());
            v1.sort();
            v2.sort();
            v1 == v2
        });
        if !(r.passed() && same && t <= Duration::from_secs(120)) {
            bad.push(i);
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} instances, failures {bad:?}, max time {:.1}s", cases.len(), longest.as_secs_f64()),
    )
}

fn main() {
    let ps = suite();
    let mut all = true;
    let mut report = |n: usize, limit: Option<Duration>, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let t = start.elapsed();
        let in_time = limit.is_none_or(|l| t <= l);
        let ok = o.ok && in_time;
        all &= ok;
        println!(
            "{} criterion {n}: {} ({:.2}s{})",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            t.as_secs_f64(),
            limit.map_or(String::new(), |l| format!(", limit {}s", l.as_secs()))
        );
    };
    report(1, Some(Duration::from_secs(1)), &c1_worked_example);
    report(2, Some(Duration::from_secs(60)), &|| c2_jumps(&ps));
    report(3, None, &|| c3_lifting(&ps));
    report(4, None, &|| c4_decomposition(&ps));
    report(5, None, &|| c5_translates(&ps));
    report(6, Some(Duration::from_secs(10)), &c6_rvol);
    report(7, None, &c7_reconstruction);
    report(8, Some(Duration::from_secs(5)), &c8_pseudo_diophantine);
    report(9, None, &c9_gcd);
    report(10, None, &c10_codim1);
    if !all {
        std::process::exit(1);
    }
}
