use std::fs;
use std::path::{Path, PathBuf};

use clap::ArgMatches;
use koopman_core::io;
use koopman_core::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::config::{self, Manifest};
use crate::error::{missing, CliError};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli, matches: &ArgMatches) -> Result<()> {
    let file = cli.config.as_deref().map(config::read_config_file).transpose()?;
    let leaf = leaf_matches(matches);
    match cli.command {
        Command::Generate { system } => match system {
            System::Polymap(a) => generate_polymap(config::merge(a, "generate polymap", leaf, file)?),
            System::Linear(a) => generate_linear(config::merge(a, "generate linear", leaf, file)?),
            System::Oscillators(a) => generate_oscillators(config::merge(a, "generate oscillators", leaf, file)?),
        },
        Command::Decompose(a) => decompose(config::merge(a, "decompose", leaf, file)?),
        Command::Score(a) => score(config::merge(a, "score", leaf, file)?),
        Command::Reproduce(a) => reproduce(config::merge(a, "reproduce", leaf, file)?),
    }
}

fn leaf_matches(matches: &ArgMatches) -> &ArgMatches {
    match matches.subcommand() {
        Some((_, sub)) => leaf_matches(sub),
        None => matches,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| {
        CliError::Core(KoopmanError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn write_text(path: &Path, text: &str, manifest: &mut Manifest) -> Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    manifest.outputs.push(path.to_path_buf());
    Ok(())
}

fn write_pair(out: &GenerateOutput, train: &SnapshotSet, test: &SnapshotSet, manifest: &mut Manifest) -> Result<()> {
    create_dir(&out.out_dir)?;
    for (name, set) in [("train", train), ("test", test)] {
        let path = out.out_dir.join(format!("{name}.{}", out.format.extension()));
        io::store(set, &path, Some(out.format))?;
        manifest.outputs.push(path);
    }
    Ok(())
}

fn finish_generate(out: &GenerateOutput, mut manifest: Manifest, summary: Value) -> Result<()> {
    manifest.summary = summary;
    let path = out.out_dir.join("manifest.json");
    manifest.outputs.push(path.clone());
    manifest.write(&path)?;
    print!("{}", manifest.to_json());
    Ok(())
}

fn seeds_summary(out: &GenerateOutput) -> Value {
    json!({ "train_seed": out.seed, "test_seed": out.test_seed(), "noise_seed": out.noise_seed() })
}

fn generate_polymap(a: PolymapArgs) -> Result<()> {
    let map = PolyMap {
        gamma: a.gamma,
        delta: a.delta,
    };
    let out = &a.output;
    let mut train = map.sample(a.m, out.seed)?;
    if out.noise > 0.0 {
        train = train.add_noise(out.noise, out.noise_seed())?;
    }
    let test = map.sample(a.test, out.test_seed())?;
    let mut manifest = Manifest::new(config::run_config("generate polymap", &a), Some(out.seed));
    write_pair(out, &train, &test, &mut manifest)?;
    let summary = json!({ "train_pairs": train.len(), "test_pairs": test.len(), "seeds": seeds_summary(out) });
    finish_generate(out, manifest, summary)
}

fn parse_eigs(text: &str) -> Result<Vec<c64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<c64>()
                .map_err(|_| CliError::Config(format!("eigenvalue '{}' is not a number like 0.9 or 0.5+0.2i", s.trim())))
        })
        .collect()
}

fn generate_linear(a: LinearArgs) -> Result<()> {
    let eigs = parse_eigs(a.eigs.as_deref().ok_or_else(|| missing("eigs"))?)?;
    let out = &a.output;
    let system_seed = a.system_seed.unwrap_or(out.seed.wrapping_add(3));
    let system = LinearSystem::random(&eigs, a.n, system_seed)?;
    let (mut train, test) = if a.trajectory {
        (
            system.trajectory(a.m, a.dt, out.seed)?,
            system.trajectory(a.test, a.dt, out.test_seed())?,
        )
    } else {
        (system.sample_pairs(a.m, out.seed)?, system.sample_pairs(a.test, out.test_seed())?)
    };
    if out.noise > 0.0 {
        train = train.add_noise(out.noise, out.noise_seed())?;
    }
    let mut manifest = Manifest::new(config::run_config("generate linear", &a), Some(out.seed));
    write_pair(out, &train, &test, &mut manifest)?;
    let spectrum: Vec<[f64; 2]> = system.spectrum.iter().map(|z| [z.re, z.im]).collect();
    let mut seeds = seeds_summary(out);
    seeds["system_seed"] = json!(system_seed);
    let summary = json!({
        "train_pairs": train.len(),
        "test_pairs": test.len(),
        "spectrum": spectrum,
        "seeds": seeds,
    });
    finish_generate(out, manifest, summary)
}

fn generate_oscillators(a: OscillatorArgs) -> Result<()> {
    let mut field = OscillatorField::wake_surrogate(a.n, a.snapshots, a.sensor_noise);
    field.dt = a.dt;
    let out = &a.output;
    let data = field.generate(out.seed)?;
    let n_test = a.test.unwrap_or(data.len() / 2);
    let n_train = data.len().checked_sub(n_test).ok_or_else(|| {
        KoopmanError::Size(format!("{n_test} test pairs exceed the {} pairs of the series", data.len()))
    })?;
    let (mut train, test) = data.split(n_train, n_test, SplitStrategy::Prefix)?;
    if out.noise > 0.0 {
        train = train.add_noise(out.noise, out.noise_seed())?;
    }
    let mut manifest = Manifest::new(config::run_config("generate oscillators", &a), Some(out.seed));
    write_pair(out, &train, &test, &mut manifest)?;
    let spectrum: Vec<Value> = field
        .continuous_spectrum()
        .iter()
        .map(|z| json!({ "growth_rate": z.re, "frequency_hz": z.im / (2.0 * std::f64::consts::PI) }))
        .collect();
    let summary = json!({
        "train_pairs": train.len(),
        "test_pairs": test.len(),
        "dt": field.dt,
        "continuous_spectrum": spectrum,
        "seeds": seeds_summary(out),
    });
    finish_generate(out, manifest, summary)
}

fn sibling(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}

fn decompose(a: DecomposeArgs) -> Result<()> {
    let train_path = a.train.as_deref().ok_or_else(|| missing("train"))?;
    let rank: Rank = a.rank.parse()?;
    match a.method {
        Method::Edmd if a.dictionary.is_none() => return Err(missing("dictionary")),
        Method::Kdmd if a.kernel.is_none() => return Err(missing("kernel")),
        _ => {}
    }
    if a.dictionary.is_some() && a.method != Method::Edmd {
        return Err(CliError::Config("--dictionary only applies to --method edmd".into()));
    }
    if a.kernel.is_some() && a.method != Method::Kdmd {
        return Err(CliError::Config("--kernel only applies to --method kdmd".into()));
    }
    let train = io::load(train_path, None)?;
    let mut dec = match a.method {
        Method::Dmd => dmd(&train, rank)?,
        Method::Tdmd => tdmd(&train, rank)?,
        Method::Edmd => {
            let spec: MonomialSpec = a.dictionary.as_deref().unwrap_or_default().parse()?;
            edmd(&train, &monomial_dictionary(train.state_dim(), spec)?, rank)?
        }
        Method::Kdmd => {
            let kernel: Kernel = a.kernel.as_deref().unwrap_or_default().parse()?;
            kdmd(&train, &kernel, rank)?
        }
    };
    let run = config::run_config("decompose", &a);
    dec.provenance.config = Some(run.clone());
    for w in &dec.provenance.warnings {
        log::warn!("{w}");
    }

    let mut manifest = Manifest::new(run, None);
    write_text(&a.out, &dec.to_json()?, &mut manifest)?;
    if let Some(path) = &a.modes {
        let modes = dec.state_modes()?;
        let re = Mat::from_fn(modes.nrows(), modes.ncols(), |i, j| modes[(i, j)].re);
        let im = Mat::from_fn(modes.nrows(), modes.ncols(), |i, j| modes[(i, j)].im);
        io::store(&SnapshotSet::new(re, im)?, path, None)?;
        manifest.outputs.push(path.clone());
    }
    manifest.summary = json!({
        "method": dec.method,
        "requested_rank": a.rank,
        "effective_rank": dec.rank,
        "numerical_rank": dec.provenance.numerical_rank,
        "training_pairs": dec.provenance.training_pairs,
        "warnings": dec.provenance.warnings,
    });
    let manifest_path = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;

    println!(
        "{} rank {} (requested {}, numerical {}) from {} pairs -> {}",
        dec.method,
        dec.rank,
        a.rank,
        dec.provenance.numerical_rank,
        train.len(),
        a.out.display()
    );
    Ok(())
}

fn parse_analytic(spec: &str, k_max: u32, l_max: u32) -> Result<AnalyticSpec> {
    let bad = || CliError::Config(format!("analytic reference '{spec}' is not polymap or polymap:<gamma>,<delta>"));
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    if !name.trim().eq_ignore_ascii_case("polymap") {
        return Err(bad());
    }
    let map = match params {
        None => PolyMap::default(),
        Some(p) => {
            let (g, d) = p.split_once(',').ok_or_else(bad)?;
            PolyMap {
                gamma: g.trim().parse().map_err(|_| bad())?,
                delta: d.trim().parse().map_err(|_| bad())?,
            }
        }
    };
    Ok(AnalyticSpec { map, k_max, l_max })
}

fn score(a: ScoreArgs) -> Result<()> {
    let dec_path = a.decomposition.as_deref().ok_or_else(|| missing("decomposition"))?;
    let test_path = a.test.as_deref().ok_or_else(|| missing("test"))?;
    let text = fs::read_to_string(dec_path).map_err(|source| KoopmanError::Io {
        path: dec_path.to_path_buf(),
        source,
    })?;
    let dec = KoopmanDecomposition::from_json(&text)?;
    let test = io::load(test_path, None)?;
    let analytic = a
        .analytic
        .as_deref()
        .map(|s| parse_analytic(s, a.k_max, a.l_max))
        .transpose()?;
    let amplitude_data = a.amplitudes.as_deref().map(|p| io::load(p, None)).transpose()?;
    let run = config::run_config("score", &a);
    let options = ReportOptions {
        analytic,
        amplitude_data: amplitude_data.as_ref(),
        dt: a.dt.or(test.dt()),
        norm: a.norm,
        domain: None,
        config: Some(run.clone()),
    };
    let report = assemble_report(&dec, &test, &options)?;
    for w in &report.metadata.warnings {
        log::warn!("{w}");
    }

    let mut manifest = Manifest::new(run, None);
    write_text(&a.out, &report.to_json()?, &mut manifest)?;
    let csv_path = a.csv.clone().unwrap_or_else(|| sibling(&a.out, "csv"));
    write_text(&csv_path, &report.to_csv(), &mut manifest)?;
    let scored = report.records.iter().filter(|r| r.alpha.is_some()).count();
    manifest.summary = json!({ "eigenpairs": report.records.len(), "scored": scored, "test_pairs": test.len() });
    let manifest_path = a.manifest.clone().unwrap_or_else(|| sibling(&a.out, "manifest.json"));
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;

    print_report(&report, a.alpha_max);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
}

fn print_report(report: &AccuracyReport, alpha_max: Option<f64>) {
    println!(
        "{:>5}  {:>24}  {:>10}  {:>10}  {:>10}  {:>10}  {:>8}",
        "index", "mu", "alpha", "tau", "theta", "freq_hz", "match"
    );
    for i in report.by_alpha() {
        let r = &report.records[i];
        if let (Some(limit), Some(alpha)) = (alpha_max, r.alpha) {
            if alpha > limit {
                continue;
            }
        }
        if alpha_max.is_some() && r.alpha.is_none() {
            continue;
        }
        let mu = format!("{:+.6}{:+.6}i", r.eigenvalue_re, r.eigenvalue_im);
        let matched = r.matched.map_or_else(|| "-".into(), |(k, l)| format!("({k},{l})"));
        println!(
            "{:>5}  {mu:>24}  {:>10}  {:>10}  {:>10}  {:>10}  {matched:>8}",
            r.index,
            fmt_opt(r.alpha),
            fmt_opt(r.tau),
            fmt_opt(r.theta),
            r.continuous.map_or_else(|| "-".into(), |c| format!("{:.4}", c.frequency_hz)),
        );
    }
}

const FIG_KERNELS: [(&str, Kernel); 4] = [
    ("poly5", Kernel::Polynomial { degree: 5 }),
    ("exp", Kernel::Exponential),
    ("gauss1", Kernel::Gaussian { sigma: 1.0 }),
    ("laplace1", Kernel::Laplacian { sigma: 1.0 }),
];

fn reproduce(a: ReproduceArgs) -> Result<()> {
    create_dir(&a.out_dir)?;
    let run = config::run_config("reproduce", &a);
    let mut manifest = Manifest::new(run.clone(), Some(a.seed));
    let summary = match a.figure {
        Figure::Fig1 => fig1(&a, &run, &mut manifest)?,
        Figure::Fig2 => fig2(&a, &mut manifest)?,
        Figure::Fig3 => fig3(&a, &run, &mut manifest)?,
        Figure::Fig4Noise => fig4_noise(&a, &mut manifest)?,
    };
    manifest.summary = summary;
    let path = a.out_dir.join("manifest.json");
    manifest.outputs.push(path.clone());
    manifest.write(&path)?;
    print!("{}", manifest.to_json());
    Ok(())
}

fn polymap_pair(a: &ReproduceArgs, seed: u64) -> Result<(SnapshotSet, SnapshotSet)> {
    let map = PolyMap::default();
    Ok((map.sample(a.m, seed)?, map.sample(a.test, seed.wrapping_add(1))?))
}

fn analytic_options(run: &Value) -> ReportOptions<'static> {
    ReportOptions {
        analytic: Some(AnalyticSpec::default()),
        config: Some(run.clone()),
        ..ReportOptions::default()
    }
}

fn fig1_decomposition(a: &ReproduceArgs) -> Result<(KoopmanDecomposition, SnapshotSet)> {
    let (train, test) = polymap_pair(a, a.seed)?;
    let dict = monomial_dictionary(2, MonomialSpec::PerCoordinateMax(5))?;
    Ok((edmd(&train, &dict, Rank::Auto)?, test))
}

fn fig1(a: &ReproduceArgs, run: &Value, manifest: &mut Manifest) -> Result<Value> {
    let (dec, test) = fig1_decomposition(a)?;
    let report = assemble_report(&dec, &test, &analytic_options(run))?;
    write_text(&a.out_dir.join("fig1.csv"), &report.to_csv(), manifest)?;
    write_text(&a.out_dir.join("fig1.json"), &report.to_json()?, manifest)?;
    let alphas: Vec<Option<f64>> = report.records.iter().map(|r| r.alpha).collect();
    Ok(json!({ "dictionary": "percoord:5", "rank": dec.rank, "alpha": alphas }))
}

fn grid_csv(points: MatRef<'_, f64>, values: &[f64]) -> String {
    let mut out = String::from("x1,x2,value\n");
    for (p, v) in values.iter().enumerate() {
        out.push_str(&format!("{:e},{:e},{v:e}\n", points[(0, p)], points[(1, p)]));
    }
    out
}

/// Scales to unit maximum modulus after rotating onto the reference.
fn align(computed: &[c64], reference: &[f64]) -> Vec<f64> {
    let overlap: c64 = computed.iter().zip(reference).map(|(c, r)| c.conj() * r).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c64::new(1.0, 0.0) };
    let rotated: Vec<c64> = computed.iter().map(|c| c * phase).collect();
    let max = rotated.iter().map(|z| z.norm()).fold(0.0, f64::max);
    rotated.iter().map(|z| if max > 0.0 { z.re / max } else { 0.0 }).collect()
}

fn fig2(a: &ReproduceArgs, manifest: &mut Manifest) -> Result<Value> {
    let (dec, _) = fig1_decomposition(a)?;
    let domain = Domain::default();
    let (points, _) = domain.grid()?;
    let map = PolyMap::default();
    let mut summary = Vec::new();
    for (k, l) in [(1u32, 1u32), (6, 0)] {
        let pair = AnalyticEigenpair {
            k,
            l,
            eigenvalue: map.gamma.powi(k as i32) * map.delta.powi(l as i32),
        };
        let i = nearest_computed(&dec.eigenvalues, c64::new(pair.eigenvalue, 0.0))
            .ok_or_else(|| KoopmanError::Numerical("decomposition has no eigenvalues".into()))?;
        let analytic: Vec<f64> = (0..points.ncols()).map(|p| pair.eval(&[points[(0, p)], points[(1, p)]])).collect();
        let max = analytic.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let analytic: Vec<f64> = analytic.iter().map(|v| v / max).collect();
        let computed = align(&dec.eigenfunction_values(i, points.as_ref())?, &analytic);
        let theta = eigenfunction_error(&dec, i, &|x: &[f64]| c64::new(pair.eval(x), 0.0), &domain)?;
        let tag = format!("phi{k}{l}");
        write_text(&a.out_dir.join(format!("fig2_{tag}_analytic.csv")), &grid_csv(points.as_ref(), &analytic), manifest)?;
        write_text(&a.out_dir.join(format!("fig2_{tag}_computed.csv")), &grid_csv(points.as_ref(), &computed), manifest)?;
        summary.push(json!({
            "k": k,
            "l": l,
            "analytic_eigenvalue": pair.eigenvalue,
            "computed_index": i,
            "computed_eigenvalue": [dec.eigenvalues[i].re, dec.eigenvalues[i].im],
            "theta": theta,
        }));
    }
    Ok(json!({ "grid": domain, "eigenpairs": summary }))
}

fn fig3(a: &ReproduceArgs, run: &Value, manifest: &mut Manifest) -> Result<Value> {
    let (train, test) = polymap_pair(a, a.seed)?;
    let mut summary = serde_json::Map::new();
    for (name, kernel) in FIG_KERNELS {
        let dec = kdmd(&train, &kernel, Rank::Auto)?;
        let report = assemble_report(&dec, &test, &analytic_options(run))?;
        write_text(&a.out_dir.join(format!("fig3_{name}.csv")), &report.to_csv(), manifest)?;
        summary.insert(name.into(), json!({ "kernel": kernel.to_string(), "rank": dec.rank }));
    }
    Ok(Value::Object(summary))
}

fn fig4_noise(a: &ReproduceArgs, manifest: &mut Manifest) -> Result<Value> {
    let mut table = String::from("kernel,seed,index,re_mu,im_mu,alpha\n");
    let mut summary = String::from("kernel,mean_alpha_near_1,mean_alpha_near_0.9\n");
    let mut means = serde_json::Map::new();
    for (name, kernel) in FIG_KERNELS {
        let (mut near_one, mut near_nine) = (0.0, 0.0);
        for s in 0..a.seeds {
            let seed = a.seed.wrapping_add(s);
            let (train, test) = polymap_pair(a, seed)?;
            let train = train.add_noise(a.noise, seed.wrapping_add(2))?;
            let dec = kdmd(&train, &kernel, Rank::Auto)?;
            let alphas: Vec<Option<f64>> = mode_errors(&dec, &test, NormVariant::AbsSum)?
                .into_iter()
                .map(|r| r.ok())
                .collect();
            for (i, (mu, alpha)) in dec.eigenvalues.iter().zip(&alphas).enumerate() {
                let alpha = alpha.map_or_else(String::new, |x| format!("{x:e}"));
                table.push_str(&format!("{name},{seed},{i},{:e},{:e},{alpha}\n", mu.re, mu.im));
            }
            let at = |target: f64| {
                nearest_computed(&dec.eigenvalues, c64::new(target, 0.0))
                    .and_then(|i| alphas[i])
                    .unwrap_or(f64::NAN)
            };
            near_one += at(1.0) / a.seeds as f64;
            near_nine += at(0.9) / a.seeds as f64;
        }
        summary.push_str(&format!("{name},{near_one:e},{near_nine:e}\n"));
        means.insert(name.into(), json!({ "near_1": near_one, "near_0.9": near_nine }));
    }
    write_text(&a.out_dir.join("fig4_noise.csv"), &table, manifest)?;
    write_text(&a.out_dir.join("fig4_noise_summary.csv"), &summary, manifest)?;
    Ok(json!({ "noise": a.noise, "seeds": a.seeds, "mean_alpha": means }))
}

