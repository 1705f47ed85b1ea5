//! End-to-end runs: sample, symmetrize, decompose, assemble and solve.

use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockdiag::{self, BlockError, BlockVector, IrrepBasis};
use crate::permgroup::{PermError, PermGroup};
use crate::problems::{rank_orbit_representatives, I3322Level, Problem, ProblemError, ProblemSpec};
use crate::reynolds::{ReynoldsError, Symmetrizer};
use crate::rng::{stream_rng, RNG_ALGORITHM};
use crate::sampler::{build_basis, consistency_check, stacked_vectors, Consistency, MomentOracle, Realization, SampleBasis, SampleSource, SamplerError};
use crate::scenario::{monomial_set, MonomialSet, Probe, ScenarioError};
use crate::sdp::{assemble, solve, SdpError, SdpProblem, SdpSolution, SolveStatus, SolverOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("problem: {0}")]
    Problem(#[from] ProblemError),
    #[error("monomials: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("group: {0}")]
    Group(#[from] PermError),
    #[error("symmetrization: {0}")]
    Reynolds(#[from] ReynoldsError),
    #[error("decomposition: {0}")]
    Blocks(#[from] BlockError),
    #[error("sampling: {0}")]
    Sampler(#[from] SamplerError),
    #[error("sdp: {0}")]
    Sdp(#[from] SdpError),
    #[error("consistency check failed: matrix residual {matrix:e}, objective residual {objective:e}")]
    Inconsistent { matrix: f64, objective: f64 },
    #[error("rank enumeration is only available for the i3322 family")]
    NoEnumeration,
}

/// How much symmetry is exploited.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Raw moment matrices.
    None,
    /// Group-averaged moment matrices.
    Reynolds,
    /// Averaged matrices split into isotypic components.
    Isotypic,
    /// Averaged matrices reduced to one block per irreducible representation.
    Irreps,
    /// Irrep blocks computed straight from the sampled vectors.
    Blocks,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::None, Method::Reynolds, Method::Isotypic, Method::Irreps, Method::Blocks];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Reynolds => "reynolds",
            Method::Isotypic => "isotypic",
            Method::Irreps => "irreps",
            Method::Blocks => "blocks",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown method {s:?}; expected one of none, reynolds, isotypic, irreps, blocks"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunOptions {
    pub method: Method,
    pub seed: u64,
    /// Upper limit on drawn samples before giving up on saturation.
    pub max_samples: usize,
    /// Largest acceptable consistency residual.
    pub consistency_tol: f64,
    pub solver: SolverOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { method: Method::Irreps, seed: 1, max_samples: 20_000, consistency_tol: 1e-6, solver: SolverOptions::default() }
    }
}

/// Setup-stage streams live far above the per-sample stream ids.
const SETUP_STREAM: u64 = 1 << 40;

/// Everything a run needs before sampling.
pub struct Setup {
    pub problem: Problem,
    pub group: PermGroup,
    pub mset: MonomialSet,
    pub symmetrizer: Symmetrizer,
    /// Present for the isotypic, irreps and blocks methods.
    pub decomposition: Option<IrrepBasis>,
    pub method: Method,
    pub seed: u64,
    pub timings: Vec<(String, f64)>,
}

impl Setup {
    pub fn new(problem: Problem, method: Method, seed: u64) -> Result<Self, PipelineError> {
        let mut timings = Vec::new();
        let t = Instant::now();
        let mut rng = stream_rng(seed, SETUP_STREAM);
        let group = problem.group()?.with_chain(&mut rng);
        let probe = Probe::new(&problem.scenario, Some(&group), &mut stream_rng(seed, SETUP_STREAM | 1))?;
        let mset = monomial_set(&problem.scenario, &problem.level, &problem.extra, Some(&group), probe)?;
        timings.push(("monomials".into(), t.elapsed().as_secs_f64()));

        let t = Instant::now();
        let symmetrizer = match method {
            Method::None => Symmetrizer::trivial(mset.len()),
            _ => Symmetrizer::from_group(&group, &mset, &problem.scenario, &mut stream_rng(seed, SETUP_STREAM | 2))?,
        };
        timings.push(("symmetrizer".into(), t.elapsed().as_secs_f64()));

        let t = Instant::now();
        let mut rng = stream_rng(seed, SETUP_STREAM | 3);
        let decomposition = match method {
            Method::None | Method::Reynolds => None,
            Method::Isotypic => Some(IrrepBasis::from_isotypic(&blockdiag::isotypic(&symmetrizer, &mut rng)?)),
            Method::Irreps | Method::Blocks => {
                let iso = blockdiag::isotypic(&symmetrizer, &mut rng)?;
                Some(blockdiag::irreps(&symmetrizer, &iso, &mut rng))
            }
        };
        timings.push(("decomposition".into(), t.elapsed().as_secs_f64()));
        Ok(Self { problem, group, mset, symmetrizer, decomposition, method, seed, timings })
    }

    pub fn group_order(&self) -> u64 {
        self.group.order().map_or(1, |o| o.min(u64::MAX as u128) as u64)
    }

    fn objective(&self) -> impl Fn(&Realization) -> f64 + Sync + '_ {
        |r: &Realization| self.problem.objective.evaluate(r)
    }

    /// Draws samples until their span saturates.
    pub fn sample_basis(&self, max_samples: usize) -> Result<SampleBasis, PipelineError> {
        let objective = self.objective();
        let oracle = MomentOracle {
            scenario: &self.problem.scenario,
            mset: &self.mset,
            objective: &objective,
            orbit: self.group.chain.as_ref().filter(|c| c.order() > 1),
            seed: self.seed,
        };
        let source = Source { setup: self, oracle };
        Ok(build_basis(&source, max_samples)?)
    }
}

struct Source<'a> {
    setup: &'a Setup,
    oracle: MomentOracle<'a>,
}

impl SampleSource for Source<'_> {
    fn weights(&self) -> Vec<usize> {
        match &self.setup.decomposition {
            Some(b) => b.weights(),
            None => vec![1],
        }
    }

    fn draw(&self, index: u64) -> Result<(BlockVector, f64), SamplerError> {
        let s = self.setup;
        if s.method == Method::Blocks {
            let basis = s.decomposition.as_ref().expect("blocks method has a decomposition");
            let real = self.oracle.realization(index)?;
            let p = (self.oracle.objective)(&real);
            let stacked = stacked_vectors(&real, &s.mset);
            // Components that are not of real type have no trace-only block formula.
            let bv = match blockdiag::sample_block_direct(basis, &stacked) {
                Ok(bv) => bv,
                Err(_) => {
                    let mut g = stacked.transpose() * &stacked;
                    crate::linalg::symmetrize_upper(&mut g);
                    blockdiag::extract_blocks(basis, &s.symmetrizer.apply(&g))
                }
            };
            return Ok((bv, p));
        }
        let sample = self.oracle.sample(index)?;
        let bv = match s.method {
            Method::None => BlockVector::single(sample.gamma),
            Method::Reynolds => BlockVector::single(s.symmetrizer.apply(&sample.gamma)),
            _ => blockdiag::extract_blocks(s.decomposition.as_ref().expect("decomposition"), &s.symmetrizer.apply(&sample.gamma)),
        };
        Ok((bv, sample.objective))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BlockInfo {
    pub size: usize,
    /// Multiplicity weight (irrep dimension).
    pub weight: usize,
    pub real_type: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverInfo {
    pub status: SolveStatus,
    pub iterations: usize,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub reduced_dims: Vec<usize>,
}

/// Outcome of one rank profile during an enumeration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileResult {
    pub ranks: Vec<usize>,
    /// Deepest level reached for this profile, and its bound there.
    pub level: I3322Level,
    pub bound: f64,
    pub pruned: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub problem: String,
    pub spec: ProblemSpec,
    pub method: Method,
    pub seed: u64,
    pub rng: String,
    pub monomials: usize,
    pub group_order: u64,
    /// Single-permutation passes per group average.
    pub transversal_passes: usize,
    pub basis_rank: usize,
    pub samples_drawn: usize,
    pub blocks: Vec<BlockInfo>,
    /// `count[min,max]` of block sizes, or `1[n]` for a single block.
    pub block_summary: String,
    pub consistency: Consistency,
    pub bound: f64,
    pub solver: SolverInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<ProfileResult>>,
    /// Wall-clock seconds per stage; excluded from reproducibility comparisons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<(String, f64)>,
}

impl Report {
    /// Pretty JSON; timings only when asked for, so identical runs give identical text.
    pub fn to_json(&self, with_timings: bool) -> String {
        let mut r = self.clone();
        if !with_timings {
            r.timings.clear();
        }
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut rows = vec![
            ("problem", self.problem.clone()),
            ("method", self.method.name().to_string()),
            ("seed", self.seed.to_string()),
            ("monomials", self.monomials.to_string()),
            ("group order", self.group_order.to_string()),
            ("basis rank", self.basis_rank.to_string()),
            ("samples drawn", self.samples_drawn.to_string()),
            ("blocks", self.block_summary.clone()),
            ("consistency", format!("{:.2e} / {:.2e}", self.consistency.matrix_residual, self.consistency.objective_residual)),
            ("solver", format!("{:?} after {} iterations, gap {:.2e}", self.solver.status, self.solver.iterations, self.solver.duality_gap)),
            ("bound", format!("{:.8}", self.bound)),
        ];
        if let Some(p) = &self.profiles {
            rows.push(("rank profiles", format!("{} ({} pruned)", p.len(), p.iter().filter(|x| x.pruned).count())));
        }
        let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }
}

pub fn block_summary(sizes: &[usize]) -> String {
    let (lo, hi) = (sizes.iter().min().copied().unwrap_or(0), sizes.iter().max().copied().unwrap_or(0));
    if lo == hi && sizes.len() == 1 {
        format!("1[{lo}]")
    } else {
        format!("{}[{lo},{hi}]", sizes.len())
    }
}

/// Sampled basis and assembled SDP of a prepared setup.
pub struct Assembled {
    pub basis: SampleBasis,
    pub consistency: Consistency,
    pub sdp: SdpProblem,
}

pub fn assemble_setup(setup: &Setup, opts: &RunOptions) -> Result<Assembled, PipelineError> {
    let basis = setup.sample_basis(opts.max_samples)?;
    let consistency = consistency_check(&basis, opts.consistency_tol);
    if !consistency.passed {
        return Err(PipelineError::Inconsistent { matrix: consistency.matrix_residual, objective: consistency.objective_residual });
    }
    let sdp = assemble(&basis);
    Ok(Assembled { basis, consistency, sdp })
}

/// Runs the full pipeline for one problem instance.
pub fn run(spec: &ProblemSpec, opts: &RunOptions) -> Result<Report, PipelineError> {
    let problem = spec.build()?;
    let mut setup = Setup::new(problem, opts.method, opts.seed)?;
    let t = Instant::now();
    let a = assemble_setup(&setup, opts)?;
    setup.timings.push(("sampling".into(), t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let sol = solve(&a.sdp, &opts.solver)?;
    setup.timings.push(("solve".into(), t.elapsed().as_secs_f64()));
    Ok(report(spec, &setup, &a, &sol, opts))
}

fn report(spec: &ProblemSpec, setup: &Setup, a: &Assembled, sol: &SdpSolution, opts: &RunOptions) -> Report {
    let blocks: Vec<BlockInfo> = match &setup.decomposition {
        Some(b) => b.irreps.iter().map(|i| BlockInfo { size: i.multiplicity, weight: i.dim, real_type: i.real_type }).collect(),
        None => vec![BlockInfo { size: setup.mset.len(), weight: 1, real_type: true }],
    };
    let sizes: Vec<usize> = blocks.iter().map(|b| b.size).collect();
    Report {
        problem: spec.label(),
        spec: spec.clone(),
        method: opts.method,
        seed: opts.seed,
        rng: RNG_ALGORITHM.into(),
        monomials: setup.mset.len(),
        group_order: setup.group_order(),
        transversal_passes: setup.symmetrizer.passes(),
        basis_rank: a.basis.rank,
        samples_drawn: a.basis.drawn,
        block_summary: block_summary(&sizes),
        blocks,
        consistency: a.consistency,
        bound: sol.objective,
        solver: SolverInfo {
            status: sol.status,
            iterations: sol.iterations,
            dual_objective: sol.dual_objective,
            duality_gap: sol.duality_gap,
            reduced_dims: sol.reduced_dims.clone(),
        },
        profiles: None,
        timings: setup.timings.clone(),
    }
}

/// Maximum of the bound over all rank profiles of an i3322 instance, one
/// representative per orbit of the symmetry group.
///
/// Best-first search over the level ladder: every profile starts with its
/// cheapest bound, and the profile with the largest current bound is refined
/// to the next level. Each level upper-bounds the richer ones, so once the top
/// profile is at the final level its bound dominates every other profile.
pub fn run_rank_enumeration(spec: &ProblemSpec, opts: &RunOptions) -> Result<Report, PipelineError> {
    let &ProblemSpec::I3322 { c, d, level, .. } = spec else { return Err(PipelineError::NoEnumeration) };
    let free = spec.build()?;
    let elements = free.group()?.with_chain(&mut stream_rng(opts.seed, SETUP_STREAM)).chain.expect("chain").elements();
    let reps = rank_orbit_representatives(d, &elements);
    let ladder: Vec<I3322Level> = [I3322Level::One, I3322Level::Small, I3322Level::Four].into_iter().filter(|l| rank_of(*l) <= rank_of(level)).collect();
    let last = ladder.len() - 1;

    let bound_at = |ranks: &[usize], lvl: I3322Level| -> Result<(f64, Report), PipelineError> {
        let s = ProblemSpec::I3322 { c, d, ranks: Some(ranks.to_vec()), level: lvl };
        let mut setup = Setup::new(s.build()?, opts.method, opts.seed)?;
        let a = assemble_setup(&setup, opts)?;
        let t = Instant::now();
        let sol = solve(&a.sdp, &opts.solver)?;
        setup.timings.push(("solve".into(), t.elapsed().as_secs_f64()));
        Ok((sol.objective, report(&s, &setup, &a, &sol, opts)))
    };

    let mut open = BinaryHeap::with_capacity(reps.len());
    // Reports of final-level solves, by rank profile.
    let mut finished: HashMap<Vec<usize>, Report> = HashMap::new();
    for ranks in reps {
        let (bound, r) = bound_at(&ranks, ladder[0])?;
        if last == 0 {
            finished.insert(ranks.clone(), r);
        }
        open.push(Candidate { bound, step: 0, ranks });
    }
    loop {
        let top = open.pop().expect("at least one rank profile");
        if top.step < last {
            let step = top.step + 1;
            let (bound, r) = bound_at(&top.ranks, ladder[step])?;
            if step == last {
                finished.insert(top.ranks.clone(), r);
            }
            open.push(Candidate { bound, step, ranks: top.ranks });
            continue;
        }
        let mut rep = finished.remove(&top.ranks).expect("final-level report");
        let mut profiles = vec![ProfileResult { ranks: top.ranks, level: ladder[last], bound: top.bound, pruned: false }];
        let mut rest = open.into_sorted_vec();
        rest.reverse();
        profiles.extend(rest.into_iter().map(|o| ProfileResult { ranks: o.ranks, level: ladder[o.step], bound: o.bound, pruned: true }));
        rep.bound = top.bound;
        rep.timings.clear();
        rep.profiles = Some(profiles);
        return Ok(rep);
    }
}

/// Open profile of the enumeration, ordered by bound, then by ladder depth,
/// then by reversed ranks so that ties pop in a fixed order.
#[derive(Debug)]
struct Candidate {
    bound: f64,
    step: usize,
    ranks: Vec<usize>,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound.total_cmp(&other.bound).then(self.step.cmp(&other.step)).then_with(|| other.ranks.cmp(&self.ranks))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Candidate {}

fn rank_of(l: I3322Level) -> u8 {
    match l {
        I3322Level::One => 0,
        I3322Level::Small => 1,
        I3322Level::Four => 2,
    }
}
