use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use yhmm::equivalence::{are_equivalent, tv_distance};
use yhmm::expfam::{at, divergence, potential_gradient, GeneratorSet};
use yhmm::indep::{
    check_identifiability, decompose, ert_generators, indep_exp_family, indep_tangent_report, two_hidden_state_report,
    DecomposeOutcome, IndepGeneratorSet,
};
use yhmm::io::{parse_model, GeneratorFile, IndepGeneratorFile, LoadedModel, ModelInput};
use yhmm::model::{sample, stationary};
use yhmm::observables::{check_cap, check_genericity, exact_output_law, index_word, reachability_profile, word_index};
use yhmm::tangent::{self, build_generators, find_e3_pair, generator_quotient_rank, tangent_report};
use yhmm::{Distribution, Error, Settings, Vector, YTransitionModel};

use crate::report::{float, matrix_json, object, sha256_hex, vector_json};

/// Failure of a subcommand: a library error or an I/O problem.
#[derive(Debug)]
pub enum Failure {
    Library(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;

/// What a subcommand produced: results, warnings, and whether a verdict was
/// left indeterminate.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub warnings: Vec<String>,
    pub indeterminate: bool,
}

/// Everything a subcommand reads, recorded with its digest.
pub struct Context {
    pub settings: Settings,
    pub inputs: BTreeMap<String, String>,
}

impl Context {
    pub fn read(&mut self, path: &Path) -> CmdResult<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), format!("sha256:{}", sha256_hex(&bytes)));
        Ok(bytes)
    }

    pub fn load_model(&mut self, path: &Path) -> CmdResult<(ModelInput, String)> {
        let bytes = self.read(path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| Failure::Library(Error::Parse(e.to_string())))?;
        Ok((parse_model(&text, &self.settings)?, sha256_hex(&bytes)))
    }
}

fn write_file(path: &Path, contents: &str) -> CmdResult<()> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// How the initial law was chosen on the command line.
#[derive(Debug, Clone, Default)]
pub struct InitChoice {
    pub init: Option<Vec<f64>>,
    pub stationary: bool,
}

/// The chosen law; `fixed` is false when it is the stationary law.
struct Initial {
    p: Distribution,
    fixed: bool,
    source: &'static str,
}

impl Initial {
    fn json(&self) -> Value {
        object([("source", json!(self.source)), ("p", vector_json(self.p.p()))])
    }

    fn fixed_law(&self) -> Option<&Distribution> {
        self.fixed.then_some(&self.p)
    }
}

fn initial(model: &YTransitionModel, file_p0: Option<&Distribution>, choice: &InitChoice, s: &Settings) -> CmdResult<Initial> {
    if let Some(p) = &choice.init {
        if p.len() != model.d() {
            return Err(Error::DimensionMismatch(format!("--init has {} entries for {} states", p.len(), model.d())).into());
        }
        let p = Distribution::new_with_tol(Vector::from_vec(p.clone()), s.stochastic_tol)?;
        return Ok(Initial { p, fixed: true, source: "argument" });
    }
    match file_p0 {
        Some(p) if !choice.stationary => Ok(Initial { p: p.clone(), fixed: true, source: "file" }),
        _ => Ok(Initial { p: stationary(model, s)?, fixed: false, source: "stationary" }),
    }
}

fn model_json(model: &YTransitionModel) -> Value {
    Value::Array(model.matrices().iter().map(matrix_json).collect())
}

pub fn validate(ctx: &mut Context, path: &Path) -> CmdResult<Outcome> {
    let (input, _) = ctx.load_model(path)?;
    let m = input.y_model();
    let s = &ctx.settings;
    let mut warnings = Vec::new();
    let irreducible = m.is_irreducible(s.support_tol);
    if !irreducible {
        warnings.push("the support of |W| is reducible; the stationary law may not be unique".into());
    }
    let form = match &input.model {
        LoadedModel::General(_) => "general",
        LoadedModel::Independent { .. } => "independent",
    };
    let results = object([
        ("valid", json!(true)),
        ("form", json!(form)),
        ("d", json!(m.d())),
        ("dY", json!(m.dy())),
        ("full_support", json!(m.has_full_support(s.support_tol))),
        ("irreducible", json!(irreducible)),
        ("has_initial_law", json!(input.p0.is_some())),
    ]);
    Ok(Outcome { results, warnings, indeterminate: false })
}

pub fn stats(ctx: &mut Context, path: &Path, choice: &InitChoice) -> CmdResult<Outcome> {
    let (input, _) = ctx.load_model(path)?;
    let s = ctx.settings.clone();
    let m = input.y_model();
    let init = initial(m, input.p0.as_ref(), choice, &s)?;
    let reach = reachability_profile(m, &init.p, &s)?;
    let obs = &reach.observability;
    let gen = check_genericity(m, &init.p, &s)?;
    let e3 = find_e3_pair(m, &s)?;
    let results = object([
        ("initial", init.json()),
        (
            "observability",
            object([
                ("k_W", json!(obs.k_w)),
                ("d_W", json!(obs.d_w)),
                ("kernel_dims", json!(obs.kernels.iter().map(|k| k.dim()).collect::<Vec<_>>())),
                ("used_recursion", json!(obs.used_recursion)),
            ]),
        ),
        (
            "reachability",
            object([
                ("k_PW", json!(reach.k_pw)),
                ("d_PW", json!(reach.d_pw)),
                ("reachable_dims", json!(reach.spaces.iter().map(|v| v.dim()).collect::<Vec<_>>())),
                ("quotient_dim", json!(reach.quotient.dim())),
            ]),
        ),
        (
            "genericity",
            object([
                ("E1", json!(gen.e1)),
                ("E2", json!(gen.e2)),
                ("E3", json!(e3.is_some())),
                ("E3_pair", json!(e3.map(|(a, b)| vec![a, b]))),
            ]),
        ),
        ("irreducible", json!(m.is_irreducible(s.support_tol))),
    ]);
    Ok(Outcome { results, ..Default::default() })
}

pub fn equiv(ctx: &mut Context, a: &Path, b: &Path, tol: Option<f64>, force_stationary: bool) -> CmdResult<Outcome> {
    let (ia, _) = ctx.load_model(a)?;
    let (ib, _) = ctx.load_model(b)?;
    let s = ctx.settings.clone();
    let (ma, mb) = (ia.y_model(), ib.y_model());
    let mut warnings = Vec::new();
    let both_fixed = !force_stationary && ia.p0.is_some() && ib.p0.is_some();
    if !force_stationary && ia.p0.is_some() != ib.p0.is_some() {
        warnings.push("only one file carries P0; both processes were compared at their stationary laws".into());
    }
    let choice = InitChoice { init: None, stationary: !both_fixed };
    let pa = initial(ma, ia.p0.as_ref(), &choice, &s)?;
    let pb = initial(mb, ib.p0.as_ref(), &choice, &s)?;
    let tol = tol.unwrap_or(s.equivalence_tol);
    let cert = are_equivalent(ma, &pa.p, mb, &pb.p, tol, &s)?;
    let intertwiner = cert.intertwiner.as_ref().map(|t| {
        object([
            ("t", matrix_json(&t.t)),
            ("in_state_coordinates", matrix_json(&t.in_state_coordinates())),
            ("basis_words", json!(t.labels)),
            ("action_residual", float(t.action_residual)),
            ("initial_residual", float(t.initial_residual)),
        ])
    });
    let results = object([
        ("verdict", serde_json::to_value(cert.verdict).expect("verdict serializes")),
        ("window", json!(cert.k_used)),
        ("tv_distance", float(cert.tv_distance)),
        ("tolerance", float(tol)),
        ("initial_a", pa.json()),
        ("initial_b", pb.json()),
        ("intertwiner", intertwiner.unwrap_or(Value::Null)),
    ]);
    Ok(Outcome { results, warnings, indeterminate: false })
}

pub fn tangent(ctx: &mut Context, path: &Path, choice: &InitChoice, emit: Option<&Path>) -> CmdResult<Outcome> {
    let (input, _) = ctx.load_model(path)?;
    let s = ctx.settings.clone();
    let m = input.y_model();
    let init = initial(m, input.p0.as_ref(), choice, &s)?;
    let rep = tangent_report(m, init.fixed_law(), &s)?;
    let local_dim = if init.fixed { rep.local_dim_fixed } else { rep.local_dim_asymptotic };
    let mut warnings = Vec::new();
    if rep.singular.is_none() {
        warnings.push("the model lacks full support; the generic dimension does not apply".into());
    }
    if !rep.containments_hold {
        warnings.push("a subspace containment check failed; dimensions may be unreliable".into());
    }
    let mut generators = Value::Null;
    let mut gs = None;
    if emit.is_some() {
        gs = match build_generators(m, init.fixed_law(), &s) {
            Ok(gs) => Some(gs),
            Err(Error::Precondition(msg)) if m.d() == 2 && rep.singular == Some(true) => {
                warnings.push(format!("{msg}; emitting the two-state singular generators instead"));
                Some(tangent::two_state_singular_generators(m, &s)?)
            }
            Err(Error::Precondition(msg)) => {
                warnings.push(format!("no generator set emitted: {msg}"));
                None
            }
            Err(e) => return Err(e.into()),
        };
    }
    if let (Some(out), Some(gs)) = (emit, gs) {
        let rank = generator_quotient_rank(&gs, init.fixed_law(), &s)?;
        let text = serde_json::to_string_pretty(&GeneratorFile::from_families(gs.gens())).expect("generators serialize");
        write_file(out, &text)?;
        generators = object([
            ("path", json!(out.display().to_string())),
            ("count", json!(gs.len())),
            ("quotient_rank", json!(rank)),
            ("sha256", json!(sha256_hex(text.as_bytes()))),
        ]);
    }
    let results = object([
        ("initial", init.json()),
        ("mode", json!(if init.fixed { "fixed" } else { "stationary" })),
        ("local_dim", json!(local_dim)),
        ("singular", json!(rep.singular)),
        ("report", serde_json::to_value(&rep).expect("report serializes")),
        ("generators", generators),
    ]);
    Ok(Outcome { results, warnings, indeterminate: false })
}

pub fn indep(ctx: &mut Context, path: &Path, choice: &InitChoice, emit: Option<&Path>) -> CmdResult<Outcome> {
    let (input, _) = ctx.load_model(path)?;
    let s = ctx.settings.clone();
    let m = input.y_model();
    let mut warnings = Vec::new();
    let mut indeterminate = false;
    let decomposition = match decompose(m, &s) {
        Ok(rep) => {
            let outcome = match &rep.outcome {
                DecomposeOutcome::Decomposed { indep, t, tv } => object([
                    ("status", json!("decomposed")),
                    ("Wmat", matrix_json(indep.w())),
                    ("V", matrix_json(indep.v())),
                    ("T", matrix_json(t)),
                    ("tv_check", float(*tv)),
                ]),
                DecomposeOutcome::Failed { condition, detail } => object([
                    ("status", json!("failed")),
                    ("condition", json!(condition.to_string())),
                    ("detail", json!(detail)),
                ]),
                DecomposeOutcome::Indeterminate { condition, detail } => {
                    indeterminate = true;
                    warnings.push(format!("{condition} is inside the indeterminate band: {detail}"));
                    object([
                        ("status", json!("indeterminate")),
                        ("condition", json!(condition.to_string())),
                        ("detail", json!(detail)),
                    ])
                }
            };
            object([
                ("outcome", outcome),
                ("witness", json!(rep.witness)),
                ("eigen_gap", float(rep.eigen_gap)),
                ("max_imaginary", float(rep.max_imaginary)),
                ("min_eigenvalue", float(rep.min_eigenvalue)),
                ("leakage", rep.leakage.map(float).unwrap_or(Value::Null)),
                ("min_transition_entry", rep.min_transition_entry.map(float).unwrap_or(Value::Null)),
            ])
        }
        Err(Error::Singular(msg)) => {
            warnings.push(format!("factorization needs an invertible |W|: {msg}"));
            Value::Null
        }
        Err(e) => return Err(e.into()),
    };
    let mut results = object([("decomposition", decomposition)]);
    if let Some(im) = input.indep() {
        let init = initial(m, input.p0.as_ref(), choice, &s)?;
        let d = im.d();
        let dy = im.dy();
        let spaces = indep_tangent_report(im, init.fixed_law(), &s)?;
        let ident = check_identifiability(im, &init.p, None, &s)?;
        let ert = ert_generators(im, &s)?;
        let ert_rank = tangent::generator_rank_mod_n(ert.embedded().base(), ert.embedded().gens(), &s)?;
        let mut ert_json = object([
            ("count", json!(ert.len())),
            ("expected", json!(d * (d + dy - 2))),
            ("rank", json!(ert_rank)),
            ("path", Value::Null),
        ]);
        if let Some(out) = emit {
            let text = serde_json::to_string_pretty(&IndepGeneratorFile::from_parts(ert.ga(), ert.gb())).expect("generators serialize");
            write_file(out, &text)?;
            ert_json["path"] = json!(out.display().to_string());
        }
        let map = results.as_object_mut().expect("results is an object");
        map.insert("initial".into(), init.json());
        map.insert(
            "tangent".into(),
            object([
                ("dim_l1", json!(spaces.dim_l1)),
                ("dim_l2", json!(spaces.dim_l2)),
                ("dim_lp", json!(spaces.dim_lp)),
                ("dim_l2p", json!(spaces.dim_l2p)),
                ("dim_lp_stationary", json!(spaces.dim_lp_stationary)),
                ("local_dim_fixed", json!(spaces.local_dim_fixed)),
                ("local_dim_asymptotic", json!(spaces.local_dim_asymptotic)),
                ("invertible_form_agrees", json!(spaces.invertible_form_agrees)),
                ("rank_one_form_agrees", json!(spaces.rank_one_form_agrees)),
                ("pullback_agrees", json!(spaces.pullback_agrees)),
            ]),
        );
        map.insert(
            "identifiability".into(),
            object([
                ("columns_independent", json!(ident.columns_independent)),
                ("k_W", json!(ident.k_w)),
                ("kernel_trivial", json!(ident.kernel_trivial)),
                ("initial_full_support", json!(ident.initial_full_support)),
                ("notice", json!(ident.notice)),
            ]),
        );
        map.insert("ert_generators".into(), ert_json);
        if d == 2 {
            let ts = two_hidden_state_report(im, init.fixed_law(), &s)?;
            map.insert("two_state".into(), serde_json::to_value(&ts).expect("report serializes"));
        }
    }
    Ok(Outcome { results, warnings, indeterminate })
}

fn parse_theta(v: &[f64], expected: usize, name: &str) -> CmdResult<Vec<f64>> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch(format!("{name} has {} entries for {expected} generators", v.len())).into());
    }
    Ok(v.to_vec())
}

pub fn expfam(
    ctx: &mut Context,
    path: &Path,
    gens_path: &Path,
    theta: &[f64],
    grad: bool,
    div: Option<&[f64]>,
) -> CmdResult<Outcome> {
    let (input, _) = ctx.load_model(path)?;
    let s = ctx.settings.clone();
    let m = input.y_model();
    let text = String::from_utf8(ctx.read(gens_path)?).map_err(|e| Failure::Library(Error::Parse(e.to_string())))?;
    let indep_file = serde_json::from_str::<IndepGeneratorFile>(&text).ok();
    let (gs, indep_set) = match (input.indep(), indep_file) {
        (Some(im), Some(file)) => {
            let (ga, gb) = file.to_parts(im.d(), im.dy())?;
            let set = IndepGeneratorSet::new(im.clone(), ga, gb, &s)?;
            (set.embedded().clone(), Some(set))
        }
        (None, Some(_)) => {
            return Err(Error::InvalidArgument("generators in (ga, gb) form need a model given as (Wmat, V)".into()).into())
        }
        (_, None) => {
            let file: GeneratorFile = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            (GeneratorSet::new(m.clone(), file.to_families(m.d(), m.dy())?, &s)?, None)
        }
    };
    let theta = parse_theta(theta, gs.len(), "--theta")?;
    let pt = at(&gs, &theta, &s)?;
    let mut results = object([
        ("theta", json!(theta)),
        ("lambda", float(pt.lambda)),
        ("phi", float(pt.phi)),
        ("W", model_json(&pt.model)),
        ("stationary", vector_json(stationary(&pt.model, &s)?.p())),
    ]);
    let map = results.as_object_mut().expect("results is an object");
    if let Some(set) = &indep_set {
        let ip = indep_exp_family(set, &theta, &s)?;
        map.insert(
            "independent".into(),
            object([
                ("Wmat", matrix_json(&ip.w)),
                ("V", matrix_json(&ip.v)),
                ("lambda", float(ip.lambda)),
                ("product_residual", float(ip.product_residual)),
            ]),
        );
    }
    if grad {
        map.insert("gradient".into(), vector_json(&potential_gradient(&gs, &theta, &s)?));
    }
    if let Some(t2) = div {
        let t2 = parse_theta(t2, gs.len(), "--div")?;
        map.insert("divergence".into(), object([("theta2", json!(t2)), ("value", float(divergence(&gs, &theta, &t2, &s)?))]));
    }
    Ok(Outcome { results, ..Default::default() })
}

pub struct SampleArgs {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn sample_cmd(ctx: &mut Context, path: &Path, choice: &InitChoice, args: &SampleArgs) -> CmdResult<Outcome> {
    let (input, digest) = ctx.load_model(path)?;
    let s = ctx.settings.clone();
    let m = input.y_model();
    let init = initial(m, input.p0.as_ref(), choice, &s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dy = m.dy();
    // Empirical laws of the first j outputs, for every j whose law can be enumerated.
    let windows: Vec<usize> = (1..=args.k).take_while(|&j| check_cap(dy, j, s.enumeration_cap).is_ok()).collect();
    let mut counts: Vec<Vec<f64>> = windows.iter().map(|&j| vec![0.0; dy.pow(j as u32)]).collect();
    let mut text = format!("# seed={} model_sha256={} n={} k={}\n", args.seed, digest, args.n, args.k);
    for i in 0..args.n {
        let tr = sample(m, &init.p, args.k, &mut rng)?;
        let _ = writeln!(text, "# trajectory {i} x0={}", tr.x0);
        for (x, y) in &tr.steps {
            let _ = writeln!(text, "{x} {y}");
        }
        let ys = tr.outputs();
        for (c, &j) in counts.iter_mut().zip(&windows) {
            c[word_index(&ys[..j], dy)] += 1.0;
        }
    }
    write_file(&args.out, &text)?;
    let mut tv = Vec::new();
    for (c, &j) in counts.iter().zip(&windows) {
        let exact = exact_output_law(m, &init.p, j, s.enumeration_cap)?;
        let emp = Vector::from_iterator(c.len(), c.iter().map(|v| v / args.n.max(1) as f64));
        tv.push(object([("k", json!(j)), ("tv", float(tv_distance(&exact, &emp)))]));
    }
    let mut warnings = Vec::new();
    if windows.len() < args.k {
        warnings.push(format!("exact laws above k = {} exceed the enumeration cap and were not compared", windows.len()));
    }
    let results = object([
        ("initial", init.json()),
        ("trajectories", json!(args.n)),
        ("length", json!(args.k)),
        ("seed", json!(args.seed)),
        ("sample_file", json!(args.out.display().to_string())),
        ("sample_sha256", json!(sha256_hex(text.as_bytes()))),
        ("empirical_vs_exact", Value::Array(tv)),
    ]);
    Ok(Outcome { results, warnings, indeterminate: false })
}

pub fn oracle(ctx: &mut Context, path: &Path, k: usize, choice: &InitChoice) -> CmdResult<Outcome> {
    let (input, _) = ctx.load_model(path)?;
    let s = ctx.settings.clone();
    let m = input.y_model();
    let init = initial(m, input.p0.as_ref(), choice, &s)?;
    let law = exact_output_law(m, &init.p, k, s.enumeration_cap)?;
    let entries = law
        .iter()
        .enumerate()
        .map(|(i, p)| object([("word", json!(index_word(i, k, m.dy()))), ("p", float(*p))]))
        .collect();
    let results = object([
        ("initial", init.json()),
        ("k", json!(k)),
        ("words", json!(law.len())),
        ("total", float(law.sum())),
        ("law", Value::Array(entries)),
    ]);
    Ok(Outcome { results, ..Default::default() })
}
