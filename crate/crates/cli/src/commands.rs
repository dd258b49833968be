//! One function per subcommand. Each fills in the defaults it resolves (so
//! the emitted header shows them) and returns the result table.

use cocycle_lab::acceptance;
use cocycle_lab::avalanche::{ap_apply, random_chain, schrodinger_chain, APReport, MatrixChain};
use cocycle_lab::cocycle::{finite_scale_top_le, lyapunov_spectrum, u_values, Cocycle, Quadrature, Truncation};
use cocycle_lab::empirics::{
    birkhoff_average, deviation_from_samples, dip_from_samples, fit_decay_exponent, sample_phases, DeviationRow,
    Sampling, MIN_SAMPLES,
};
use cocycle_lab::models::{
    fitted_positivity_constant, ids, thouless_check, verify_positivity_simplicity, verify_sorets_spencer, Regime,
};
use cocycle_lab::reduction::{build_reduction, le_decomposition, verify_semiconjugation, ReductionOptions};
use cocycle_lab::rng::SeedStream;
use cocycle_lab::torus::{default_k_max, diophantine_check, DcOutcome};

use crate::config::*;
use crate::output::{Cell, Table};
use crate::CliError;

fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Validation(msg.into()))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub fn le(doc: &mut Document<LeRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let c = doc.model()?.cocycle(&freq)?;
    let run = &mut doc.run;
    let truncation = match (run.truncation, run.floor) {
        (TruncationMode::Off, None) => Truncation::Off,
        (TruncationMode::Default, None) => Truncation::Default,
        (TruncationMode::Floor, Some(t)) if t > 0.0 => Truncation::Floor(t),
        (TruncationMode::Floor, _) => return invalid("truncation = \"floor\" needs a positive floor"),
        (_, Some(_)) => return invalid("floor is only used with truncation = \"floor\""),
    };
    let mut quad = Quadrature { per_dim: run.grid, truncation, birkhoff_check: run.birkhoff };
    run.grid = Some(quad.grid_size(c.torus_dim()));
    quad.per_dim = run.grid;
    let r = finite_scale_top_le(&c, run.n, &quad)?;
    let mut t = Table::new(&["n", "estimate", "error_estimate", "excluded", "samples", "degenerate", "birkhoff"]);
    t.push(vec![
        r.n.into(),
        r.estimate.into(),
        r.error_estimate.into(),
        r.excluded.into(),
        r.samples.into(),
        r.degenerate.into(),
        r.birkhoff.map_or(Cell::Text(String::new()), Cell::Real),
    ]);
    Ok(t)
}

pub fn spectrum(doc: &mut Document<SpectrumRun>) -> Result<Table, CliError> {
    let c = doc.model()?.cocycle(&doc.frequency()?)?;
    let s = lyapunov_spectrum(&c, doc.run.n, doc.run.phases)?;
    let mut t = Table::new(&["k", "exponent"]);
    for (k, e) in s.exponents.iter().enumerate() {
        t.push(vec![(k + 1).into(), (*e).into()]);
    }
    if let Some(w) = &s.wedge_check {
        t.note(format!("wedge_check: L1+L2 = {}, top exponent of the exterior square = {}", w.sum_top_two, w.wedge_top));
    }
    Ok(t)
}

fn sampling(run: &SampleRun) -> Result<Sampling, CliError> {
    if run.ns.is_empty() || run.ns.contains(&0) {
        return invalid("ns must be a non-empty list of positive integers");
    }
    if run.samples < MIN_SAMPLES {
        return invalid(format!("samples must be at least {MIN_SAMPLES}"));
    }
    match (run.sampling, run.seed) {
        (SamplingMode::Grid, _) => Ok(Sampling::Grid),
        (SamplingMode::Random, Some(seed)) => Ok(Sampling::Random { seed }),
        (SamplingMode::Random, None) => invalid("sampling = \"random\" needs a seed"),
    }
}

pub fn un_profile(doc: &mut Document<UnProfileRun>) -> Result<Table, CliError> {
    let c = doc.model()?.cocycle(&doc.frequency()?)?;
    let mode = sampling(&doc.run)?;
    let d = c.torus_dim();
    let phases = sample_phases(d, doc.run.samples, mode);
    let mut cols = vec!["n".to_string(), "sample".to_string()];
    cols.extend((1..=d).map(|i| format!("x{i}")));
    cols.push("u".into());
    let mut t = Table { columns: cols, ..Default::default() };
    for &n in &doc.run.ns {
        for (i, (x, u)) in phases.iter().zip(u_values(&c, &phases, n)).enumerate() {
            let mut row: Vec<Cell> = vec![n.into(), i.into()];
            row.extend(x.coords().iter().map(|&v| Cell::Real(v)));
            row.push(u.into());
            t.push(row);
        }
    }
    Ok(t)
}

pub fn reduce(doc: &mut Document<ReduceRun>) -> Result<Table, CliError> {
    let c = doc.model()?.cocycle(&doc.frequency()?)?;
    let r = &doc.run;
    let opts = ReductionOptions {
        seed: r.seed,
        reference_phases: r.reference_phases,
        selection_grid: r.selection_grid,
        rank_grid: ReductionOptions::default().rank_grid,
        rank_tol: r.rank_tol,
    };
    let red = build_reduction(&c, &opts)?;
    let sc = verify_semiconjugation(&red, r.n, r.phases, SeedStream::new(r.seed).child("reduce/verify").seed())?;
    let dec = le_decomposition(&red, r.decomposition_n, r.grid, r.a, r.c0)?;
    let mut t = Table::new(&[
        "m", "k", "rows", "ranks", "min_volume", "rv", "bn", "an", "resampled", "l_a", "l_r", "l_h", "gap",
        "remainder_mean", "remainder_l2", "remainder_max", "threshold", "fraction_above",
    ]);
    t.push(vec![
        red.m().into(),
        red.k().into(),
        join(red.rows()).into(),
        join(&red.profile().geometric_ranks).into(),
        red.min_volume().into(),
        sc.rv.into(),
        sc.bn.into(),
        sc.an.into(),
        sc.rejected.into(),
        dec.l_a.into(),
        dec.l_r.into(),
        dec.l_h.into(),
        dec.gap().into(),
        dec.remainder_mean.into(),
        dec.remainder_l2.into(),
        dec.remainder_max.into(),
        dec.threshold.into(),
        dec.fraction_above.into(),
    ]);
    t.note(format!("reference_phase: {:?}", red.reference_phase().coords()));
    Ok(t)
}

fn ap_row(i: usize, r: &APReport) -> Vec<Cell> {
    vec![
        i.into(),
        r.n.into(),
        r.kappa.into(),
        r.epsilon.into(),
        r.hypotheses_met.into(),
        r.ap_estimate.into(),
        r.exact_log_norm.into(),
        r.residual.into(),
        r.bound.into(),
    ]
}

pub fn ap_check(doc: &mut Document<ApRun>) -> Result<Table, CliError> {
    let d = doc.torus_dim();
    let r = doc.run.clone();
    let chains: Vec<MatrixChain> = match r.source {
        ChainSource::Cocycle => {
            let c = doc.model()?.cocycle(&doc.frequency()?)?;
            let (Some(n0), Some(blocks)) = (r.n0, r.blocks) else {
                return invalid("source = \"cocycle\" needs n0 and blocks");
            };
            let x = phase_or_origin(&r.phase, d)?;
            doc.run.phase = Some(x.coords().to_vec());
            vec![schrodinger_chain(&c, &x, n0, blocks, r.last_len)?]
        }
        ChainSource::Random => {
            let (Some(m), Some(n), Some(kappa), Some(seed)) = (r.m, r.n, r.kappa, r.seed) else {
                return invalid("source = \"random\" needs m, n, kappa and seed");
            };
            let count = r.chains.unwrap_or(1);
            doc.run.chains = Some(count);
            let mut rng = SeedStream::new(seed).stream("ap-check/random-chains");
            (0..count).map(|_| random_chain(m, n, kappa, &mut rng)).collect::<Result<_, _>>()?
        }
    };
    let mut t = Table::new(&[
        "chain", "n", "kappa", "epsilon", "hypotheses_met", "ap_estimate", "exact_log_norm", "residual", "bound",
    ]);
    for (i, ch) in chains.iter().enumerate() {
        t.push(ap_row(i, &ap_apply(ch, r.c)?));
    }
    Ok(t)
}

fn deviation_row(r: &DeviationRow) -> Vec<Cell> {
    vec![
        r.n.into(),
        r.epsilon.into(),
        r.measure.into(),
        r.uncertainty.into(),
        r.samples.into(),
        r.mean_u.into(),
        r.max_deviation.into(),
    ]
}

fn fit_note(t: &mut Table, ns: &[u64], measures: &[f64]) {
    match fit_decay_exponent(ns, measures) {
        Some(f) => t.note(format!(
            "empirical fit log(-log mu) = b log n + c: b = {}, c = {}, points = {}",
            f.exponent, f.intercept, f.points
        )),
        None => t.note("empirical fit: fewer than two measures strictly inside (0, 1)"),
    }
}

pub fn ldt(doc: &mut Document<LdtRun>) -> Result<Table, CliError> {
    let c = doc.model()?.cocycle(&doc.frequency()?)?;
    let run = doc.run.sample();
    let mode = sampling(&run)?;
    let eps = |n: u64| match (doc.run.epsilon, doc.run.epsilon_power) {
        (Some(e), None) if e > 0.0 => Ok(e),
        (None, Some(p)) => Ok((n as f64).powf(-p)),
        _ => invalid("give exactly one of a positive epsilon or epsilon_power"),
    };
    let phases = sample_phases(c.torus_dim(), run.samples, mode);
    let mut t = Table::new(&["n", "epsilon", "measure", "uncertainty", "samples", "mean_u", "max_deviation"]);
    let mut measures = Vec::new();
    for &n in &run.ns {
        let row = deviation_from_samples(&u_values(&c, &phases, n), n, eps(n)?);
        measures.push(row.measure);
        t.push(deviation_row(&row));
    }
    fit_note(&mut t, &run.ns, &measures);
    Ok(t)
}

pub fn dip(doc: &mut Document<DipRun>) -> Result<Table, CliError> {
    let c = doc.model()?.cocycle(&doc.frequency()?)?;
    let run = doc.run.sample();
    let mode = sampling(&run)?;
    if !(doc.run.t > 0.0) {
        return invalid("t must be positive");
    }
    let phases = sample_phases(c.torus_dim(), run.samples, mode);
    let mut t = Table::new(&["n", "t", "measure", "uncertainty", "samples"]);
    for &n in &run.ns {
        let r = dip_from_samples(&u_values(&c, &phases, n), n, doc.run.t);
        t.push(vec![r.n.into(), r.t.into(), r.measure.into(), r.uncertainty.into(), r.samples.into()]);
    }
    Ok(t)
}

pub fn birkhoff(doc: &mut Document<BirkhoffRun>) -> Result<Table, CliError> {
    let d = doc.torus_dim();
    let c = doc.model()?.cocycle(&doc.frequency()?)?;
    let x = phase_or_origin(&doc.run.phase, d)?;
    doc.run.phase = Some(x.coords().to_vec());
    let mut quad = Quadrature::default().without_birkhoff();
    doc.run.grid = Some(doc.run.grid.unwrap_or(quad.grid_size(d)));
    quad.per_dim = doc.run.grid;
    let space = finite_scale_top_le(&c, doc.run.n0, &quad)?.estimate;
    let mut t = Table::new(&["n0", "terms", "average", "space_mean", "deviation"]);
    for &terms in &doc.run.terms {
        let r = birkhoff_average(&c, doc.run.n0, terms, &x, space)?;
        t.push(vec![r.n0.into(), r.terms.into(), r.average.into(), r.space_mean.into(), r.deviation.into()]);
    }
    Ok(t)
}

pub fn dc_check(doc: &mut Document<DcRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let k_max = doc.run.k_max.unwrap_or(default_k_max(freq.dim()));
    doc.run.k_max = Some(k_max);
    let r = diophantine_check(&freq, doc.run.t, k_max)?;
    let (k, dist, resonance) = match &r.outcome {
        DcOutcome::Certified(_) => (String::new(), Cell::Text(String::new()), false),
        DcOutcome::Violation { k, distance, resonance } => (join(k), Cell::Real(*distance), *resonance),
    };
    let mut t = Table::new(&["passed", "t", "k_max", "t_star", "t_star_at", "checked", "violation_k", "violation_distance", "resonance"]);
    t.push(vec![
        r.passed().into(),
        doc.run.t.into(),
        k_max.into(),
        r.t_star.into(),
        join(&r.t_star_at).into(),
        r.checked.into(),
        k.into(),
        dist,
        resonance.into(),
    ]);
    Ok(t)
}

pub fn schrodinger(doc: &mut Document<SchrodingerRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let (f, lambda) = doc.model()?.schrodinger(freq.dim())?;
    let energies = doc.run.energies.resolve("energies")?;
    doc.run.energies = Values::List(energies.clone());
    let mut quad = Quadrature::default().without_birkhoff();
    doc.run.grid = Some(doc.run.grid.unwrap_or(quad.grid_size(freq.dim())));
    quad.per_dim = doc.run.grid;
    let rows = verify_sorets_spencer(&f, &freq, lambda, &energies, doc.run.n, &quad)?;
    let mut t = Table::new(&["energy", "regime", "le", "le_error", "integral", "residual", "margin"]);
    for r in &rows {
        t.push(vec![
            r.energy.into(),
            if r.regime == Regime::Inside { "inside" } else { "outside" }.into(),
            r.le.into(),
            r.le_error.into(),
            r.integral.into(),
            r.residual.into(),
            r.margin.into(),
        ]);
    }
    t.note(format!("fitted_positivity_constant: {}", fitted_positivity_constant(&rows)));
    Ok(t)
}

pub fn jacobi_le(doc: &mut Document<JacobiLeRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let p = doc.model()?.jacobi(freq.dim())?;
    let energies = doc.run.energies.resolve("energies")?;
    doc.run.energies = Values::List(energies.clone());
    let mut t = Table::new(&["energy", "k", "exponent"]);
    for &e in &energies {
        let c = cocycle_lab::models::jacobi_cocycle(&p, freq.clone(), e, doc.run.regularized)?;
        let s = lyapunov_spectrum(&c, doc.run.n, doc.run.phases)?;
        for (k, v) in s.exponents.iter().enumerate() {
            t.push(vec![e.into(), (k + 1).into(), (*v).into()]);
        }
    }
    if doc.run.regularized {
        t.note(format!("weight_constant: {}", p.weight_constant()));
    }
    Ok(t)
}

fn grid_phases(d: usize, count: usize) -> Result<Vec<cocycle_lab::torus::TorusPoint>, CliError> {
    if count == 0 {
        return invalid("phases must be positive");
    }
    Ok(cocycle_lab::torus::phase_grid_at_least(d, count))
}

pub fn ids_cmd(doc: &mut Document<IdsRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let p = doc.model()?.jacobi(freq.dim())?;
    let energies = doc.run.energies.resolve("energies")?;
    doc.run.energies = Values::List(energies.clone());
    let phases = grid_phases(freq.dim(), doc.run.phases)?;
    let mut t = Table::new(&["energy", "ids"]);
    for &e in &energies {
        t.push(vec![e.into(), ids(&p, &freq, e, doc.run.n, &phases)?.value.into()]);
    }
    Ok(t)
}

pub fn thouless(doc: &mut Document<ThoulessRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let p = doc.model()?.jacobi(freq.dim())?;
    let energies = doc.run.energies.resolve("energies")?;
    doc.run.energies = Values::List(energies.clone());
    let le_n = doc.run.le_n.unwrap_or(doc.run.n as u64);
    doc.run.le_n = Some(le_n);
    let phases = grid_phases(freq.dim(), doc.run.phases)?;
    let mut t = Table::new(&["energy", "lhs", "rhs", "residual", "weight_constant", "shifted"]);
    for &e in &energies {
        let r = thouless_check(&p, &freq, e, doc.run.n, le_n, &phases)?;
        t.push(vec![e.into(), r.lhs.into(), r.rhs.into(), r.residual.into(), r.weight_constant.into(), r.shifted.into()]);
    }
    Ok(t)
}

pub fn positivity(doc: &mut Document<PositivityRun>) -> Result<Table, CliError> {
    let freq = doc.frequency()?;
    let p = doc.model()?.jacobi(freq.dim())?;
    let lambdas = doc.run.lambdas.resolve("lambdas")?;
    let energies = doc.run.energies.resolve("energies")?;
    doc.run.lambdas = Values::List(lambdas.clone());
    doc.run.energies = Values::List(energies.clone());
    let rep = verify_positivity_simplicity(&p, &freq, &lambdas, &energies, doc.run.n, doc.run.phases)?;
    let mut cols = vec!["lambda".to_string(), "energy".to_string()];
    cols.extend((1..=p.l()).map(|k| format!("L{k}")));
    cols.extend(["margin".to_string(), "min_gap".to_string()]);
    let mut t = Table { columns: cols, ..Default::default() };
    for r in &rep.rows {
        let mut row: Vec<Cell> = vec![r.lambda.into(), r.energy.into()];
        row.extend(r.exponents.iter().map(|&v| Cell::Real(v)));
        row.extend([r.margin.into(), r.min_gap.into()]);
        t.push(row);
    }
    t.note(format!("weight_nonsingular: {}", rep.weight_nonsingular));
    t.note(format!("constant_eigenvalue_hits: {:?}", rep.constant_eigenvalue_hits));
    Ok(t)
}

/// The table and whether every selected criterion passed.
pub fn accept(run: &mut AcceptRun) -> Result<(Table, bool), CliError> {
    if run.criteria.is_empty() {
        run.criteria = (1..=12).collect();
    }
    if let Some(bad) = run.criteria.iter().find(|&&i| !(1..=12).contains(&i)) {
        return invalid(format!("criterion {bad} does not exist (1..=12)"));
    }
    let mut t = Table::new(&["id", "name", "passed", "detail"]);
    let mut all = true;
    for &id in &run.criteria {
        let o = acceptance::run(id);
        all &= o.passed;
        t.push(vec![o.id.into(), o.name.into(), o.passed.into(), o.detail.into()]);
        t.note(format!("criterion {} took {:.1} s", o.id, o.elapsed.as_secs_f64()));
    }
    Ok((t, all))
}
