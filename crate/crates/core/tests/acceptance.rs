//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the report is printed in order; exits non-zero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use symnv::pipeline::{run, run_rank_enumeration, Method, Report, RunOptions};
use symnv::problems::{sic_quantum_value, I3322Level, PairRanks, ProblemSpec};

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Self { ok: true, detail: String::new() }
    }

    fn record(&mut self, ok: bool, note: String) {
        self.ok &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&note);
        if !ok {
            self.detail.push_str(" [x]");
        }
    }

    fn within(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        self.record((value - target).abs() <= tol, format!("{label} {value:.6} vs {target} ± {tol:e}"));
    }

    fn equal<T: PartialEq + std::fmt::Debug>(&mut self, label: &str, value: T, target: T) {
        let ok = value == target;
        self.record(ok, format!("{label} {value:?}{}", if ok { String::new() } else { format!(" expected {target:?}") }));
    }
}

fn opts(method: Method) -> RunOptions {
    RunOptions { method, ..RunOptions::default() }
}

fn timed(f: impl FnOnce() -> Report) -> (Report, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn bound(spec: &ProblemSpec, method: Method) -> Report {
    run(spec, &opts(method)).unwrap_or_else(|e| panic!("{}: {e}", spec.label()))
}

fn rac_bounds(c: &mut Check) {
    for (d, target) in [(2, 0.7887), (3, 0.6989)] {
        let (r, t) = timed(|| bound(&ProblemSpec::Rac { n: 3, d }, Method::Irreps));
        c.within(&format!("rac(3,{d})"), r.bound, target, 2e-4);
        c.record(t < Duration::from_secs(120), format!("{:.1}s", t.as_secs_f64()));
    }
    for d in [2, 3] {
        let upper = bound(&ProblemSpec::Rac { n: 2, d }, Method::Irreps).bound;
        let lower = common::seesaw::rac_lower_bound(2, d, 20, 300, 7);
        c.record(lower <= upper + 1e-7 && upper - lower <= 1e-4, format!("rac(2,{d}) upper {upper:.7} see-saw {lower:.7}"));
    }
}

fn i3322_bounds(c: &mut Check) {
    for (cc, d, target, tol, limit) in [(1.0, 2, 5.0, 1e-5, 900), (1.0, 4, 5.003502, 1e-4, 900), (2.0, 3, 8.050117, 1e-4, 900)] {
        let spec = ProblemSpec::I3322 { c: cc, d, ranks: None, level: I3322Level::Four };
        let (r, t) = timed(|| run_rank_enumeration(&spec, &opts(Method::Blocks)).unwrap_or_else(|e| panic!("{e}")));
        c.within(&format!("i3322(c={cc},d={d})"), r.bound, target, tol);
        c.record(t < Duration::from_secs(limit), format!("{:.0}s", t.as_secs_f64()));
    }
}

fn sic_bounds(c: &mut Check) {
    let two = bound(&ProblemSpec::Sic { d: 2, pair_ranks: PairRanks::RankOne }, Method::Irreps).bound;
    c.within("sic(2)", two, 12.8484, 1e-3);
    let quantum = sic_quantum_value(2);
    c.record(two < quantum - 1e-3, format!("gap to {quantum:.4}: {:.4}", quantum - two));
    let three = bound(&ProblemSpec::Sic { d: 3, pair_ranks: PairRanks::RankOne }, Method::Irreps).bound;
    c.record((70.0961..=70.1143).contains(&three), format!("sic(3) {three:.6} in [70.0961, 70.1143]"));
}

fn structure(c: &mut Check) {
    let rac = ProblemSpec::Rac { n: 2, d: 3 };
    let none = common::setup(&rac, Method::None);
    c.equal("rac(2,3) monomials", none.mset.len(), 70);
    c.equal("group order", none.group_order(), 72);
    c.equal("plain rank", none.sample_basis(20_000).unwrap().rank, 545);
    c.equal("symmetrized rank", common::setup(&rac, Method::Reynolds).sample_basis(20_000).unwrap().rank, 13);
    let irreps = common::setup(&rac, Method::Irreps);
    let blocks = &irreps.decomposition.as_ref().unwrap().irreps;
    let mut iso: Vec<usize> = blocks.iter().map(|b| b.dim * b.multiplicity).collect();
    let mut mult: Vec<usize> = blocks.iter().map(|b| b.multiplicity).collect();
    iso.sort_unstable();
    mult.sort_unstable();
    c.equal("isotypic dims", iso, vec![2, 3, 4, 5, 12, 16, 28]);
    c.equal("multiplicities", mult, vec![1, 1, 3, 3, 4, 5, 7]);
    for (d, size, rank, summary) in [(2, Some(43), 65, None), (4, None, 137, Some("8[3,16]"))] {
        let r = bound(&ProblemSpec::Sic { d, pair_ranks: PairRanks::RankOne }, Method::Irreps);
        if let Some(n) = size {
            c.equal(&format!("sic({d}) size"), r.monomials, n);
        }
        c.equal(&format!("sic({d}) basis"), r.basis_rank, rank);
        if let Some(s) = summary {
            c.equal(&format!("sic({d}) blocks"), r.block_summary.as_str(), s);
        }
    }
}

fn method_equivalence(c: &mut Check) {
    for spec in common::small_builtins() {
        let bounds: Vec<f64> = Method::ALL.iter().map(|&m| bound(&spec, m).bound).collect();
        let lo = bounds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = bounds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        c.record(hi - lo <= 1e-5, format!("{} spread {:.1e}", spec.label(), hi - lo));
    }
}

fn properties(c: &mut Check) {
    let mut worst = [0.0f64; 7];
    let mut positivity = true;
    let mut roundtrip = true;
    for spec in common::small_builtins() {
        let s = common::setup(&spec, Method::Irreps);
        for seed in 0..3 {
            let (idem, inv) = common::reynolds_errors(&s.symmetrizer, seed);
            let b = common::block_checks(&s, seed);
            let vals = [idem, inv, common::chained_vs_naive(&s, seed), b.leakage, b.spectrum, b.min_eigenvalue, 0.0];
            for (w, v) in worst.iter_mut().zip(vals) {
                *w = w.max(v);
            }
            positivity &= common::positivity_agrees(&s, seed);
        }
        worst[6] = worst[6].max(common::orthogonality_error(&s.decomposition.as_ref().unwrap().u));
        let (m, p) = common::consistency(&s);
        c.record(m < 1e-6 && p < 1e-6, format!("{} consistency {:.1e}", spec.label(), m.max(p)));
        roundtrip &= common::sdpa_roundtrip(&s);
    }
    let limits = [1e-12, 1e-12, 1e-10, 1e-8, 1e-8, 1e-8, 1e-10];
    let names = ["idempotency", "invariance", "chained-vs-naive", "leakage", "spectrum", "min-eigenvalue", "orthogonality"];
    for ((n, w), l) in names.iter().zip(worst).zip(limits) {
        c.record(w < l, format!("{n} {w:.1e}"));
    }
    c.record(positivity, "positivity equivalence".into());
    c.record(roundtrip, "sdpa roundtrip".into());
}

fn main() {
    let criteria: [(&str, fn(&mut Check)); 6] = [
        ("1 random access code bounds", rac_bounds),
        ("2 I3322 bounds with rank enumeration", i3322_bounds),
        ("3 SIC witness bounds", sic_bounds),
        ("4 structural integers", structure),
        ("5 method equivalence", method_equivalence),
        ("6 property suites", properties),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let mut check = Check::new();
        let t = Instant::now();
        if let Err(e) = catch_unwind(AssertUnwindSafe(|| f(&mut check))) {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            check.record(false, format!("panicked: {}", msg.unwrap_or_default()));
        }
        let verdict = if check.ok { "PASS" } else { "FAIL" };
        failed += usize::from(!check.ok);
        println!("{verdict} criterion {name} ({:.0}s): {}", t.elapsed().as_secs_f64(), check.detail);
    }
    println!("acceptance: {} of 6 criteria passed", 6 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
