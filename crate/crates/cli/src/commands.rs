use std::path::{Path, PathBuf};

use tree_ising::model::validate;
use tree_ising::model_file::{
    parse_model, parse_unchecked_mean, read_text, to_toml, ModelFile, Parameterization,
};
use tree_ising::poisson::{build_approx, check_convex_order, mpmrf_sum_pmf, tv_bound};
use tree_ising::sampler::{mc_replicates, sample_batch, McReplicates, SamplingMethod};
use tree_ising::sum::{default_fft_len, expected_allocations, stop_loss, sum_pmf, tv_distance};
use tree_ising::tree::binary_tree_edges;
use tree_ising::{build_tree, MeanParamIsing, Pmf, Vertex};

use crate::error::CliError;
use crate::output::{Cell, Table};

/// Seed used by `reproduce-tables` and as the `sample` default.
pub const DEFAULT_SEED: u64 = 20_240_101;

pub struct Loaded {
    pub file: ModelFile,
    pub mean: MeanParamIsing,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let file = parse_model(&read_text(path)?)?;
    let mean = file.spec.to_mean(file.root)?;
    Ok(Loaded { file, mean })
}

fn resolve_vertex(mean: &MeanParamIsing, label: &str) -> Result<Vertex, CliError> {
    mean.tree()
        .topology()
        .vertex_by_label(label)
        .ok_or_else(|| CliError::input(format!("unknown vertex `{label}`")))
}

fn fft_len(mean: &MeanParamIsing, n_fft: Option<usize>) -> usize {
    n_fft.unwrap_or_else(|| default_fft_len(mean.d()))
}

/// Report text and whether the model is admissible.
pub fn validate_cmd(path: &Path) -> Result<(String, bool), CliError> {
    let text = read_text(path)?;
    if let Some(raw) = parse_unchecked_mean(&text)? {
        let rt = raw
            .topology
            .root_at(raw.root)
            .map_err(|e| CliError::input(e.to_string()))?;
        let report = validate(&rt, &raw.q, &raw.alpha);
        if report.is_ok() {
            return Ok((
                format!("ok: {} vertices, mean parameterization\n", rt.d()),
                true,
            ));
        }
        let labels = rt.topology().labels();
        let mut out = String::from("invalid:\n");
        for line in report.to_string().lines() {
            out.push_str("  ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("vertex labels by index: {}\n", labels.join(", ")));
        return Ok((out, false));
    }
    let loaded = load(path)?;
    Ok((
        format!(
            "ok: {} vertices, {} parameterization\n",
            loaded.mean.d(),
            loaded.file.spec.parameterization()
        ),
        true,
    ))
}

pub fn convert_cmd(path: &Path, to: Parameterization) -> Result<String, CliError> {
    let file = parse_model(&read_text(path)?)?;
    let spec = file.spec.convert(to, file.root)?;
    Ok(to_toml(&ModelFile {
        spec,
        root: file.root,
    }))
}

pub fn pmf_table(name: &str, p: &Pmf) -> Table {
    let mut t = Table::new(name, &["k", "p"]);
    for (k, &x) in p.values().iter().enumerate() {
        t.push(vec![k.into(), x.into()]);
    }
    t
}

pub fn pmf_sum_cmd(path: &Path, n_fft: Option<usize>) -> Result<Vec<Table>, CliError> {
    let m = load(path)?.mean;
    let p = sum_pmf(&m, fft_len(&m, n_fft))?;
    Ok(vec![pmf_table("pmf_sum", &p)])
}

pub fn allocations_cmd(
    path: &Path,
    vertex: Option<&str>,
    n_fft: Option<usize>,
) -> Result<Vec<Table>, CliError> {
    let m = load(path)?.mean;
    let n = fft_len(&m, n_fft);
    let vertices: Vec<Vertex> = match vertex {
        Some(label) => vec![resolve_vertex(&m, label)?],
        None => (0..m.d()).collect(),
    };
    let allocs = vertices
        .iter()
        .map(|&v| expected_allocations(&m, v, n))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = m.tree().topology().labels();
    let mut columns = vec!["k".to_string()];
    columns.extend(vertices.iter().map(|&v| labels[v].clone()));
    columns.push("total".to_string());
    let mut t = Table {
        name: "allocations".into(),
        columns,
        rows: Vec::new(),
    };
    for k in 0..=m.d() {
        let mut row: Vec<Cell> = vec![k.into()];
        row.extend(allocs.iter().map(|a| Cell::from(a.values[k])));
        row.push(allocs.iter().map(|a| a.values[k]).sum::<f64>().into());
        t.push(row);
    }
    Ok(vec![t])
}

pub struct SampleArgs {
    pub n: usize,
    pub seed: u64,
    pub reps: Option<usize>,
    pub level: f64,
    pub method: SamplingMethod,
    pub realizations: bool,
}

pub fn sample_cmd(path: &Path, args: &SampleArgs) -> Result<Vec<Table>, CliError> {
    let m = load(path)?.mean;
    if args.n == 0 {
        return Err(CliError::input("--n must be at least 1"));
    }
    if let Some(reps) = args.reps {
        if args.method != SamplingMethod::Direct {
            return Err(CliError::input(
                "--reps is only available with --method direct",
            ));
        }
        if !(args.level > 0.0 && args.level < 1.0) {
            return Err(CliError::input(format!(
                "--level {} is not in (0, 1)",
                args.level
            )));
        }
        let r = mc_replicates(&m, args.n, reps, args.seed)?;
        let mut t = Table::new("intervals", &["k", "mean", "lo", "hi"]);
        for (k, iv) in r.pmf_intervals(args.level).iter().enumerate() {
            let mean = r.estimates().iter().map(|p| p[k]).sum::<f64>() / reps as f64;
            t.push(vec![k.into(), mean.into(), iv.lo.into(), iv.hi.into()]);
        }
        return Ok(vec![t]);
    }
    let batch = sample_batch(&m, args.n, args.seed, args.method)?;
    if args.realizations {
        let labels = m.tree().topology().labels();
        let cols: Vec<&str> = labels.iter().map(String::as_str).collect();
        let mut t = Table::new("realizations", &cols);
        for row in batch.iter_rows() {
            t.push(row.iter().map(|&b| Cell::Int(u64::from(b))).collect());
        }
        return Ok(vec![t]);
    }
    let p = Pmf::from_counts(&batch.sum_counts());
    Ok(vec![pmf_table("empirical_pmf", &p)])
}

pub fn poisson_compare_cmd(
    path: &Path,
    n_fft: Option<usize>,
) -> Result<(Vec<Table>, bool), CliError> {
    let m = load(path)?.mean;
    let approx = build_approx(&m)?;
    let p_k = sum_pmf(&m, default_fft_len(m.d()))?;
    let p_m = mpmrf_sum_pmf(&approx, n_fft)?;
    let d = m.d();
    let mut t = Table::new(
        "comparison",
        &["k", "p_K", "p_M", "abs_diff", "pi_K", "pi_M"],
    );
    for k in 0..=d {
        let (a, b) = (p_k.prob(k), p_m.pmf.prob(k));
        let z = k as f64;
        t.push(vec![
            k.into(),
            a.into(),
            b.into(),
            (a - b).abs().into(),
            stop_loss(&p_k, z).into(),
            stop_loss(&p_m.pmf, z).into(),
        ]);
    }
    let beyond = p_m.pmf.tail(d + 1);
    t.push(vec![
        format!(">{d}").into(),
        0.0.into(),
        beyond.into(),
        beyond.into(),
        0.0.into(),
        stop_loss(&p_m.pmf, (d + 1) as f64).into(),
    ]);
    let tv = tv_distance(&p_k, &p_m.pmf);
    let bound = tv_bound(d, approx.lambda());
    let cx = check_convex_order(&p_k, &p_m.pmf);
    let mut s = Table::new("summary", &["metric", "value"]);
    s.push(vec!["tv_distance".into(), tv.into()]);
    s.push(vec!["tv_bound".into(), bound.into()]);
    s.push(vec!["mean_K".into(), cx.mean_k.into()]);
    s.push(vec!["mean_M".into(), cx.mean_m.into()]);
    s.push(vec!["truncation_bound".into(), p_m.tail_bound.into()]);
    s.push(vec!["tv_within_bound".into(), (tv <= bound).into()]);
    s.push(vec!["convex_order".into(), cx.holds.into()]);
    Ok((vec![t, s], tv <= bound && cx.holds))
}

fn study_model(q: f64) -> MeanParamIsing {
    let rt = build_tree(7, &binary_tree_edges(7))
        .and_then(|t| t.root_at(0))
        .expect("fixed binary tree");
    MeanParamIsing::homogeneous(rt, q, 0.7).expect("admissible study parameters")
}

/// Bucket `k` of the comparison tables: `K = 0, 1, 2` and `K >= 3`.
fn bucket(p: &[f64], k: usize) -> f64 {
    if k < 3 {
        p.get(k).copied().unwrap_or(0.0)
    } else {
        p.iter().skip(3).sum()
    }
}

fn mc_interval(r: &McReplicates, level: f64, k: usize) -> (f64, f64) {
    let iv = r.interval(level, |p| bucket(p, k));
    (iv.lo, iv.hi)
}

/// Sum pmf table for the study model with Monte-Carlo interval columns, and
/// the matching stop-loss table.
pub fn study_tables(q: f64, seed: u64, names: (&str, &str)) -> Result<(Table, Table), CliError> {
    const LEVEL: f64 = 0.9;
    const REPS: usize = 1000;
    let m = study_model(q);
    let p_k = sum_pmf(&m, default_fft_len(m.d()))?;
    let p_m = mpmrf_sum_pmf(&build_approx(&m)?, None)?.pmf;
    let small = mc_replicates(&m, 1000, REPS, seed)?;
    let large = mc_replicates(&m, 10_000, REPS, seed.wrapping_add(1))?;

    let mut t = Table::new(
        names.0,
        &[
            "k",
            "exact",
            "poisson",
            "mc_n1000_lo",
            "mc_n1000_hi",
            "mc_n10000_lo",
            "mc_n10000_hi",
        ],
    );
    for k in 0..4 {
        let label = if k < 3 {
            k.to_string()
        } else {
            ">=3".to_string()
        };
        let (a, b) = mc_interval(&small, LEVEL, k);
        let (c, d) = mc_interval(&large, LEVEL, k);
        t.push(vec![
            label.into(),
            bucket(p_k.values(), k).into(),
            bucket(p_m.values(), k).into(),
            a.into(),
            b.into(),
            c.into(),
            d.into(),
        ]);
    }
    let mut s = Table::new(names.1, &["z", "pi_K", "pi_M"]);
    for z in 0..=m.d() {
        s.push(vec![
            z.into(),
            stop_loss(&p_k, z as f64).into(),
            stop_loss(&p_m, z as f64).into(),
        ]);
    }
    Ok((t, s))
}

pub fn reproduce_tables(seed: u64) -> Result<Vec<Table>, CliError> {
    let (t1, t2) = study_tables(0.01, seed, ("table1", "table2"))?;
    let (t3, t4) = study_tables(0.001, seed.wrapping_add(2), ("table3", "table4"))?;
    Ok(vec![t1, t2, t3, t4])
}

pub fn write_tables(dir: &Path, tables: &[Table], as_json: bool) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in tables {
        let ext = if as_json { "json" } else { "csv" };
        let path = dir.join(format!("{}.{ext}", t.name));
        std::fs::write(
            &path,
            crate::output::render(std::slice::from_ref(t), as_json),
        )?;
        written.push(path);
    }
    Ok(written)
}
