//! One function per subcommand. Each validates, computes, then hands all
//! artifacts to [`Outputs::finish`].

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use molvae::gpbo::{bo_loop, write_history, BoState, VaeEvaluator};
use molvae::latentopt::{
    decode_points, default_perturbation_scale, distinct_molecules, fit_predictor, gradient_ascent, interpolate_grid,
    perturb, project_2d, random_walk_2d, LatentOptError,
};
use molvae::scores::{AtomContribTable, Objective, PropertySource, PropertyTable};
use molvae::smiles::{canonicalize, corpus_lines, parse_smiles, parse_valid, validate, MolGraph};
use molvae::vae::{
    content_accuracy, decode_to_valid, encode_corpus, read_checkpoint, reconstruction_accuracy, train, valid_fraction,
    write_checkpoint, EncodedString, LatentDistribution, VaeParams, Vocabulary,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{PropertyKind, RunConfig};
use crate::manifest::{Outputs, RunManifest};
use crate::{CliError, Command};

pub fn run(command: &Command, cfg: &RunConfig, out: &Path, stdout: &mut dyn Write) -> anyhow::Result<RunManifest> {
    let mut o = Outputs::new(out);
    match command {
        Command::Ingest { input } => ingest(input.as_deref(), cfg, &mut o, stdout)?,
        Command::Train => cmd_train(cfg, &mut o)?,
        Command::Eval => eval(cfg, &mut o, stdout)?,
        Command::Encode { input } => encode(input, cfg, &mut o)?,
        Command::Decode { input } => decode(input, cfg, &mut o, stdout)?,
        Command::Sample { count } => sample(*count, cfg, &mut o, stdout)?,
        Command::Perturb { smiles, count, scale } => cmd_perturb(smiles, *count, *scale, cfg, &mut o, stdout)?,
        Command::Interpolate { corners, resolution } => interpolate(corners, *resolution, cfg, &mut o)?,
        Command::Walk { smiles } => walk(smiles, cfg, &mut o)?,
        Command::Project2d => project(cfg, &mut o)?,
        Command::OptimizeBo => optimize_bo(cfg, &mut o, stdout)?,
        Command::OptimizeGrad { smiles } => optimize_grad(smiles.as_deref(), cfg, &mut o, stdout)?,
    }
    o.finish(command.name(), serde_json::to_value(command)?, cfg)
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    Ok(corpus_lines(&text).map(str::to_string).collect())
}

fn jsonl<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn canonical(s: &str) -> Option<String> {
    parse_valid(s).and_then(|g| canonicalize(&g).ok())
}

/// True for the ~10% of molecules whose canonical SMILES hashes into the
/// test bucket. Unparseable strings hash as written.
pub fn is_test_split(smiles: &str) -> bool {
    let key = canonical(smiles).unwrap_or_else(|| smiles.to_string());
    let h = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(h[..8].try_into().unwrap()) % 10 == 0
}

fn load_corpus(cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<Vec<String>> {
    let p = cfg.corpus_path()?;
    o.input(p)?;
    let lines = read_lines(p)?;
    if lines.is_empty() {
        bail!(CliError::EmptyAfterFiltering);
    }
    Ok(lines)
}

fn split_corpus(cfg: &RunConfig, corpus: &[String], o: &mut Outputs) -> anyhow::Result<(Vec<String>, Vec<String>)> {
    if let Some(h) = &cfg.heldout {
        o.input(h)?;
        return Ok((corpus.to_vec(), read_lines(h)?));
    }
    let (test, train): (Vec<String>, Vec<String>) = corpus.iter().cloned().partition(|s| is_test_split(s));
    Ok((train, test))
}

fn load_model(cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<VaeParams> {
    let p = cfg.checkpoint_path()?;
    o.input(p)?;
    let f = std::fs::File::open(p).with_context(|| p.display().to_string())?;
    read_checkpoint(std::io::BufReader::new(f)).with_context(|| format!("reading checkpoint {}", p.display()))
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|x| *x as f64).collect()
}

fn encode_many(params: &VaeParams, smiles: &[String]) -> anyhow::Result<Vec<LatentDistribution>> {
    let enc: Vec<EncodedString> = smiles.iter().map(|s| params.encode_str(s)).collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(enc.len());
    for chunk in enc.chunks(256) {
        let refs: Vec<&EncodedString> = chunk.iter().collect();
        out.extend(params.encode_batch(&refs)?);
    }
    Ok(out)
}

fn encode_one(params: &VaeParams, smiles: &str) -> anyhow::Result<Vec<f64>> {
    Ok(to_f64(&params.encode(smiles).with_context(|| format!("encoding {smiles}"))?.mu))
}

fn property_source(cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<PropertySource> {
    Ok(match cfg.scorer.property {
        PropertyKind::Logp => match &cfg.scorer.logp_table {
            Some(p) => {
                o.input(p)?;
                PropertySource::LogP(AtomContribTable::from_csv(&std::fs::read_to_string(p)?)?)
            }
            None => PropertySource::LogP(AtomContribTable::default_table().clone()),
        },
        PropertyKind::External => {
            let p = cfg.scorer.property_table.as_ref().unwrap();
            o.input(p)?;
            PropertySource::External(PropertyTable::from_csv(&std::fs::read_to_string(p)?)?)
        }
    })
}

fn ingest(input: Option<&Path>, cfg: &RunConfig, o: &mut Outputs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let path = match input {
        Some(p) => p,
        None => cfg.corpus_path()?,
    };
    o.input(path)?;
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let max_len = cfg.model.max_len;
    let mut kept = Vec::new();
    let mut seen = HashSet::new();
    let mut rejected = String::from("line\treason\tsmiles\n");
    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    let (mut input_lines, mut duplicates) = (0, 0);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        input_lines += 1;
        let reason = if line.chars().count() > max_len {
            Some(("StringTooLong".to_string(), format!("{} > {max_len}", line.chars().count())))
        } else {
            match parse_smiles(line) {
                Err(e) => Some(("ParseError".to_string(), e.to_string())),
                Ok(g) => {
                    let report = validate(&g);
                    if report.valid {
                        match canonicalize(&g) {
                            Ok(c) if !seen.insert(c.clone()) => {
                                duplicates += 1;
                                continue;
                            }
                            Ok(_) => None,
                            Err(e) => Some(("CanonicalizationFailed".to_string(), e.to_string())),
                        }
                    } else {
                        let v = &report.violations[0];
                        Some((format!("{:?}", v.code), v.message.clone()))
                    }
                }
            }
        };
        match reason {
            Some((kind, detail)) => {
                log::info!("line {}: {kind} ({detail})", i + 1);
                rejected.push_str(&format!("{}\t{kind}\t{line}\n", i + 1));
                *reasons.entry(kind).or_default() += 1;
            }
            None => kept.push(line.to_string()),
        }
    }
    if kept.is_empty() {
        bail!(CliError::EmptyAfterFiltering);
    }
    let vocab = Vocabulary::build(&kept, max_len)?;
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &kept {
        *hist.entry(s.chars().count() / 10 * 10).or_default() += 1;
    }
    let stats = json!({
        "input_lines": input_lines,
        "retained": kept.len(),
        "duplicates": duplicates,
        "rejected": reasons,
        "alphabet": vocab.chars().iter().collect::<String>(),
        "length_histogram": hist.iter().map(|(lo, n)| json!({"from": lo, "to": lo + 9, "count": n})).collect::<Vec<_>>(),
    });
    writeln!(stdout, "retained {} of {} lines ({} duplicates)", kept.len(), input_lines, duplicates)?;
    o.add("corpus.smi", kept.iter().flat_map(|s| format!("{s}\n").into_bytes()).collect());
    o.add_json("vocabulary.json", &vocab)?;
    o.add_json("ingest_stats.json", &stats)?;
    o.add("rejected.tsv", rejected.into_bytes());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<()> {
    let corpus = load_corpus(cfg, o)?;
    let (train_set, test_set) = split_corpus(cfg, &corpus, o)?;
    let all: Vec<&String> = train_set.iter().chain(&test_set).collect();
    let vocab = Vocabulary::build(&all, cfg.model.max_len)?;
    let enc = encode_corpus(&train_set, &vocab, cfg.model.max_len)?;
    let init = VaeParams::init(cfg.model.clone(), vocab, cfg.seed)?;
    let mut metrics = Vec::new();
    let outcome = train(&enc, init, &cfg.training, |m| {
        log::info!("epoch {} loss {:.4} accuracy {:.2}%", m.epoch, m.total_loss, m.accuracy);
        metrics.push(m.clone());
    })?;
    let mut ckpt = Vec::new();
    write_checkpoint(&outcome.params, &mut ckpt)?;
    o.add("model.mvae", ckpt);
    o.add("metrics.jsonl", jsonl(&metrics)?);
    o.add_json("split.json", &json!({"train": train_set.len(), "test": test_set.len()}))?;
    Ok(())
}

/// Padded and character-only accuracy on the first `limit` strings.
fn accuracy_on(params: &VaeParams, set: &[String], limit: usize) -> anyhow::Result<Option<(f64, f64)>> {
    let take = if limit == 0 { set.len() } else { limit.min(set.len()) };
    if take == 0 {
        return Ok(None);
    }
    let enc: Vec<EncodedString> = set[..take].iter().map(|s| params.encode_str(s)).collect::<Result<_, _>>()?;
    let refs: Vec<&EncodedString> = enc.iter().collect();
    Ok(Some((reconstruction_accuracy(&refs, params)?, content_accuracy(&refs, params)?)))
}

fn eval(cfg: &RunConfig, o: &mut Outputs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let corpus = load_corpus(cfg, o)?;
    let (train_set, test_set) = split_corpus(cfg, &corpus, o)?;
    let limit = cfg.training.eval_subset;
    let train_acc = accuracy_on(&params, &train_set, limit)?;
    let test_acc = accuracy_on(&params, &test_set, limit)?;
    let vf = valid_fraction(&params, cfg.explore.samples.max(1), cfg.seed)?;
    let fmt = |a: Option<(f64, f64)>| a.map_or("-\t-".to_string(), |(p, c)| format!("{p:.2}\t{c:.2}"));
    writeln!(stdout, "set\tmolecules\treconstruction %\tcharacters only %")?;
    writeln!(stdout, "train\t{}\t{}", train_set.len(), fmt(train_acc))?;
    writeln!(stdout, "test\t{}\t{}", test_set.len(), fmt(test_acc))?;
    writeln!(stdout, "valid prior decodes\t{}\t{:.2}", cfg.explore.samples.max(1), 100.0 * vf)?;
    o.add_json(
        "eval.json",
        &json!({
            "train": {"molecules": train_set.len(), "accuracy": train_acc.map(|a| a.0), "content_accuracy": train_acc.map(|a| a.1)},
            "test": {"molecules": test_set.len(), "accuracy": test_acc.map(|a| a.0), "content_accuracy": test_acc.map(|a| a.1)},
            "valid_fraction": vf,
            "eval_subset": limit,
        }),
    )?;
    Ok(())
}

fn encode(input: &Path, cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    o.input(input)?;
    let mut rows = Vec::new();
    for s in read_lines(input)? {
        rows.push(match params.encode(&s) {
            Ok(d) => json!({"smiles": s, "mu": d.mu, "logvar": d.logvar}),
            Err(e) => json!({"smiles": s, "error": e.to_string()}),
        });
    }
    o.add("latents.jsonl", jsonl(&rows)?);
    Ok(())
}

/// One vector per line, as a JSON array or whitespace/comma separated.
pub fn parse_latents(text: &str, dim: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (i, line) in corpus_lines(text).enumerate() {
        let z: Vec<f64> = if line.starts_with('[') {
            serde_json::from_str(line).with_context(|| format!("latent line {}", i + 1))?
        } else {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("latent line {}", i + 1))?
        };
        if z.len() != dim {
            bail!(CliError::ConfigInvalid(format!("latent line {} has {} values, model expects {dim}", i + 1, z.len())));
        }
        out.push(z);
    }
    Ok(out)
}

fn decode(input: &Path, cfg: &RunConfig, o: &mut Outputs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    o.input(input)?;
    let zs = parse_latents(&std::fs::read_to_string(input)?, params.latent_dim())?;
    let decoded = decode_points(&params, &zs, cfg.decode_attempts, cfg.seed)?;
    let mut rows = Vec::new();
    for (z, s) in zs.iter().zip(&decoded) {
        writeln!(stdout, "{}", s.as_deref().unwrap_or(""))?;
        rows.push(json!({"z": z, "smiles": s}));
    }
    o.add("decoded.jsonl", jsonl(&rows)?);
    Ok(())
}

fn sample(count: Option<usize>, cfg: &RunConfig, o: &mut Outputs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let n = count.unwrap_or(cfg.explore.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zs: Vec<Vec<f64>> =
        (0..n).map(|_| (0..params.latent_dim()).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let decoded = decode_points(&params, &zs, cfg.decode_attempts, cfg.seed)?;
    let valid = decoded.iter().filter(|d| d.is_some()).count();
    let distinct = distinct_molecules(&decoded);
    writeln!(stdout, "{valid}/{n} valid, {} distinct", distinct.len())?;
    let rows: Vec<_> = zs.iter().zip(&decoded).map(|(z, s)| json!({"z": z, "smiles": s})).collect();
    o.add("samples.jsonl", jsonl(&rows)?);
    o.add_json("samples_summary.json", &json!({"count": n, "valid": valid, "distinct": distinct}))?;
    Ok(())
}

fn cmd_perturb(
    smiles: &str,
    count: Option<usize>,
    scale: Option<f64>,
    cfg: &RunConfig,
    o: &mut Outputs,
    stdout: &mut dyn Write,
) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let z = encode_one(&params, smiles)?;
    let scale = match scale.or(cfg.explore.perturb_scale) {
        Some(s) => s,
        None => {
            let corpus = load_corpus(cfg, o)?;
            let take = corpus.len().min(1000);
            default_perturbation_scale(&encode_many(&params, &corpus[..take])?)
        }
    };
    let n = count.unwrap_or(cfg.explore.perturbations);
    let points = perturb(&z, scale, n, cfg.seed)?;
    let decoded = decode_points(&params, &points, cfg.decode_attempts, cfg.seed)?;
    let distinct = distinct_molecules(&decoded);
    for s in &distinct {
        writeln!(stdout, "{s}")?;
    }
    let rows: Vec<_> = points.iter().zip(&decoded).map(|(z, s)| json!({"z": z, "smiles": s})).collect();
    o.add("perturb.jsonl", jsonl(&rows)?);
    o.add_json("perturb_summary.json", &json!({"smiles": smiles, "scale": scale, "count": n, "distinct": distinct}))?;
    Ok(())
}

fn interpolate(corners: &[String], resolution: Option<usize>, cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<()> {
    if corners.len() != 4 {
        bail!(CliError::ConfigInvalid(format!("interpolate needs 4 corners, got {}", corners.len())));
    }
    let params = load_model(cfg, o)?;
    let zs: Vec<Vec<f64>> = corners.iter().map(|s| encode_one(&params, s)).collect::<Result<_, _>>()?;
    let grid = interpolate_grid(&[zs[0].clone(), zs[1].clone(), zs[2].clone(), zs[3].clone()], resolution.unwrap_or(cfg.explore.grid_resolution))?;
    let points: Vec<Vec<f64>> = grid.iter().map(|c| c.z.clone()).collect();
    let decoded = decode_points(&params, &points, cfg.decode_attempts, cfg.seed)?;
    let mut csv = String::from("row,col,a,b,smiles\n");
    let mut cells = Vec::new();
    for (c, s) in grid.iter().zip(&decoded) {
        csv.push_str(&format!("{},{},{},{},{}\n", c.row, c.col, c.a, c.b, s.as_deref().unwrap_or("")));
        cells.push(json!({"row": c.row, "col": c.col, "a": c.a, "b": c.b, "z": c.z, "smiles": s}));
    }
    o.add_json("grid.json", &json!({"corners": corners, "cells": cells}))?;
    o.add("grid.csv", csv.into_bytes());
    Ok(())
}

fn walk(smiles: &str, cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let z = encode_one(&params, smiles)?;
    let w = random_walk_2d(&z, &cfg.explore.walk_displacements, cfg.seed)?;
    let flat: Vec<Vec<f64>> = w.cells.iter().flatten().cloned().collect();
    let decoded = decode_points(&params, &flat, cfg.decode_attempts, cfg.seed)?;
    let k = w.displacements.len();
    let grid: Vec<Vec<Option<String>>> = decoded.chunks(k).map(|r| r.to_vec()).collect();
    o.add_json("walk.json", &json!({"smiles": smiles, "u": w.u, "v": w.v, "displacements": w.displacements, "decoded": grid}))?;
    Ok(())
}

fn svg_scatter(rows: &[(f64, f64, f64)]) -> String {
    let (w, h, pad) = (480.0, 480.0, 20.0);
    let ext = |f: fn(&(f64, f64, f64)) -> f64| {
        let lo = rows.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) }
    };
    let (x0, x1) = ext(|r| r.0);
    let (y0, y1) = ext(|r| r.1);
    let (p0, p1) = ext(|r| r.2);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    for r in rows {
        let cx = pad + (r.0 - x0) / (x1 - x0) * (w - 2.0 * pad);
        let cy = h - pad - (r.1 - y0) / (y1 - y0) * (h - 2.0 * pad);
        let t = (r.2 - p0) / (p1 - p0);
        let (red, blue) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
        s.push_str(&format!("<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"2\" fill=\"rgb({red},0,{blue})\"/>\n"));
    }
    s.push_str("</svg>\n");
    s
}

fn project(cfg: &RunConfig, o: &mut Outputs) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let corpus = load_corpus(cfg, o)?;
    let source = property_source(cfg, o)?;
    let mut kept = Vec::new();
    let mut values = Vec::new();
    for s in &corpus {
        if let Some(v) = parse_valid(s).and_then(|g| source.value(&g).ok()) {
            kept.push(s.as_str());
            values.push(v);
        }
    }
    let p = project_2d(&params, &kept, &values, cfg.explore.histogram_bins)?;
    let mut csv = String::from("smiles,z1,z2,property\n");
    for (s, r) in kept.iter().zip(&p.rows) {
        csv.push_str(&format!("{s},{},{},{}\n", r.0, r.1, r.2));
    }
    o.add("projection.csv", csv.into_bytes());
    o.add_json("histograms.json", &json!({"histograms": p.histograms, "prior": p.prior}))?;
    o.add("projection.svg", svg_scatter(&p.rows).into_bytes());
    Ok(())
}

fn graphs_of(corpus: &[String]) -> Vec<(usize, MolGraph)> {
    corpus.iter().enumerate().filter_map(|(i, s)| parse_valid(s).map(|g| (i, g))).collect()
}

fn optimize_bo(cfg: &RunConfig, o: &mut Outputs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let corpus = load_corpus(cfg, o)?;
    let source = property_source(cfg, o)?;
    let graphs = graphs_of(&corpus);
    let training: HashSet<String> = graphs.iter().filter_map(|(_, g)| canonicalize(g).ok()).collect();

    // initial GP data: scored molecules from a seeded shuffle of the corpus
    let mut scored: Vec<(usize, f64)> = Vec::new();
    let mut raw_graphs = Vec::new();
    for (i, g) in &graphs {
        if source.value(g).is_ok() {
            raw_graphs.push(g.clone());
            scored.push((*i, 0.0));
        }
    }
    let objective = Objective::fit(source, cfg.scorer.ring_mode, &raw_graphs)?;
    for ((_, v), g) in scored.iter_mut().zip(&raw_graphs) {
        *v = objective.score(g)?.j;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    scored.shuffle(&mut rng);
    if cfg.bo.init_points > 0 {
        scored.truncate(cfg.bo.init_points);
    }
    if scored.len() < 2 {
        bail!(CliError::ConfigInvalid("optimize-bo needs at least 2 scored corpus molecules".into()));
    }
    let init_smiles: Vec<String> = scored.iter().map(|(i, _)| corpus[*i].clone()).collect();
    let z: Vec<Vec<f64>> = encode_many(&params, &init_smiles)?.iter().map(|d| to_f64(&d.mu)).collect();
    let y: Vec<f64> = scored.iter().map(|(_, v)| *v).collect();
    let initial_best = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut evaluator =
        VaeEvaluator { params: &params, objective: &objective, attempts: cfg.decode_attempts, training: &training };
    let run = bo_loop(BoState::new(z, y), &mut evaluator, &cfg.bo.run)?;
    let mut history = Vec::new();
    write_history(&mut history, &run.records)?;
    let best = run
        .records
        .iter()
        .filter(|r| r.value.is_some())
        .max_by(|a, b| a.value.unwrap().total_cmp(&b.value.unwrap()).then(b.iteration.cmp(&a.iteration)));
    for s in &run.summaries {
        writeln!(stdout, "iteration {}: best {:.4}, valid {:.2}, novel {}", s.iteration, s.best, s.valid_fraction, s.novel)?;
    }
    o.add("history.jsonl", history);
    o.add_json(
        "bo_summary.json",
        &json!({
            "initial_points": init_smiles.len(),
            "initial_best": initial_best,
            "proposals": run.records.len(),
            "iterations": run.summaries,
            "best": best,
        }),
    )?;
    Ok(())
}

fn optimize_grad(start: Option<&str>, cfg: &RunConfig, o: &mut Outputs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let params = load_model(cfg, o)?;
    let corpus = load_corpus(cfg, o)?;
    let source = property_source(cfg, o)?;
    let mut smiles = Vec::new();
    let mut targets = Vec::new();
    for (i, g) in graphs_of(&corpus) {
        if let Ok(v) = source.value(&g) {
            smiles.push(corpus[i].clone());
            targets.push(v);
        }
    }
    let latents: Vec<Vec<f64>> = encode_many(&params, &smiles)?.iter().map(|d| to_f64(&d.mu)).collect();
    let (predictor, report) = fit_predictor(&latents, &targets, &cfg.explore.predictor)?;
    let start = start.map(str::to_string).unwrap_or_else(|| smiles[0].clone());
    let z0 = encode_one(&params, &start)?;
    let mut step = 0u64;
    let mut dec = |z: &[f64]| -> Result<Option<String>, LatentOptError> {
        let zf: Vec<f32> = z.iter().map(|v| *v as f32).collect();
        let d = decode_to_valid(&params, &zf, cfg.decode_attempts, cfg.seed.wrapping_add(step))?;
        step += 1;
        Ok(d.map(|d| d.smiles))
    };
    let trajectory = gradient_ascent(&predictor, &z0, &cfg.explore.ascent, &mut dec)?;
    for p in &trajectory.points {
        writeln!(stdout, "{:.4}\t{}", p.value, p.smiles.as_deref().unwrap_or(""))?;
    }
    o.add_json("predictor.json", &json!({"report": report, "samples": smiles.len()}))?;
    o.add_json("trajectory.json", &json!({"start": start, "trajectory": trajectory}))?;
    Ok(())
}
