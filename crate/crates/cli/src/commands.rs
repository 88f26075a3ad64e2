use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tfree_core::analysis::{
    read_documents, tfree_duplicates, CoverageAccumulator, DocFormat, Document,
    FertilityAccumulator, TokenCounter,
};
use tfree_core::head::read_wordlist;
use tfree_core::objective::{toy_train, write_loss_csv};
use tfree_core::splitter::split_bytes;
use tfree_core::trigram::{write_golden, GOLDEN_TOKENS};
use tfree_core::{
    duplicates, greedy_generate, Dictionary, EmbeddingMatrix, Error, Result, SplitConfig,
    TFreeConfig, Token, ToyModel,
};

use crate::args::{Command, EncodeFormat};
use crate::config::Resolved;

const DICT_MAGIC: &[u8; 4] = b"TFDC";
const VECTORS_MAGIC: &[u8; 4] = b"TFEV";
const VECTORS_VERSION: u32 = 1;

pub fn execute(command: Command, cfg: &Resolved, stdout: &mut dyn Write) -> Result<()> {
    let sc = SplitConfig::default();
    match command {
        Command::Split { file } => {
            for tok in split_bytes(&read_bytes(&file)?, &sc)? {
                writeln!(stdout, "{}\t{tok}", tok.kind().name())?;
            }
        }
        Command::Pattern { token } => {
            let pat = tfree_core::pattern(&Token::parse(&token, &sc)?, &cfg.tfree);
            let line: Vec<String> = pat.indices().iter().map(u32::to_string).collect();
            writeln!(stdout, "{}", line.join(" "))?;
        }
        Command::Encode {
            file,
            checkpoint,
            format,
            out,
        } => {
            let emb = EmbeddingMatrix::read_from(&mut open(&checkpoint)?)?;
            let tokens = split_bytes(&read_bytes(&file)?, &sc)?;
            with_output(out.as_deref(), stdout, |w| match format {
                EncodeFormat::Csv => encode_csv(&emb, &tokens, w),
                EncodeFormat::Bin => encode_bin(&emb, &tokens, w),
            })?;
        }
        Command::CompileDict { wordlist, out } => {
            let words = read_wordlist(open(&wordlist)?)?;
            let dict = Dictionary::compile_with(&words, &cfg.tfree, &sc)?;
            let mut w = create(&out)?;
            dict.write_to(&mut w)?;
            w.flush()?;
            writeln!(stdout, "{} words, {} active rows", dict.len(), dict.nnz())?;
        }
        Command::Decode { logits, dict, top } => {
            let dict = load_dictionary(&dict, &cfg.tfree, &sc)?;
            let logits = read_logits(&logits)?;
            let result = dict.decode_top(&logits, top.unwrap_or(0))?;
            write_json(stdout, &result)?;
        }
        Command::Fertility { corpus, counts } => {
            let mut docs = load_documents(&corpus)?;
            let counter = match counts {
                Some(path) => {
                    attach_counts(&mut docs, &path)?;
                    TokenCounter::External
                }
                None => TokenCounter::TFree(sc),
            };
            let acc = in_pool(cfg.threads, || {
                docs.par_iter()
                    .map(|d| {
                        let mut acc = FertilityAccumulator::default();
                        acc.add(d, &counter).map(|_| acc)
                    })
                    .try_reduce(FertilityAccumulator::default, |a, b| Ok(a.merge(b)))
            })??;
            write_json(stdout, &acc.finish())?;
        }
        Command::Dupes {
            vocab,
            ws_marker,
            tfree,
        } => {
            let report = if tfree {
                tfree_duplicates(&cfg.tfree)
            } else {
                let entries = read_vocab(&vocab.expect("required by the parser"))?;
                duplicates(&entries, ws_marker.expect("required by the parser"))?
            };
            write_json(stdout, &report)?;
        }
        Command::Stats { corpus, out } => {
            let docs = load_documents(&corpus)?;
            let report = in_pool(cfg.threads, || {
                docs.par_iter()
                    .fold(CoverageAccumulator::default, |mut acc, d| {
                        acc.add_text(&d.text, &sc);
                        acc
                    })
                    .reduce(CoverageAccumulator::default, CoverageAccumulator::merge)
                    .finish()
            })?;
            with_output(out.as_deref(), stdout, |w| {
                writeln!(w, "curve,x,cumulative_pct")?;
                for (name, curve) in [
                    ("by_length", &report.by_length),
                    ("top_words", &report.top_words),
                    ("top_trigrams", &report.top_trigrams),
                ] {
                    for (x, pct) in &curve.points {
                        writeln!(w, "{name},{x},{pct}")?;
                    }
                }
                Ok(())
            })?;
        }
        Command::TrainToy {
            corpus,
            h,
            steps,
            lr,
            seed,
            context,
            out,
            loss_csv,
        } => {
            let hyper = cfg.toy_hyper(h, steps, lr, seed, context)?;
            let text = String::from_utf8(read_bytes(&corpus)?)
                .map_err(|_| Error::input(format!("{}: not valid UTF-8", corpus.display())))?;
            let outcome = toy_train(&text, &cfg.tfree, &sc, &hyper)?;
            let mut w = create(&out)?;
            outcome.model.write_to(&mut w)?;
            w.flush()?;
            let loss_path = loss_csv.unwrap_or_else(|| sibling(&out, "loss.csv"));
            let mut w = create(&loss_path)?;
            write_loss_csv(&mut w, &outcome.trace)?;
            w.flush()?;
            write_json(
                stdout,
                &TrainSummary {
                    steps: hyper.steps,
                    initial_loss: outcome.trace[0],
                    final_loss: *outcome.trace.last().expect("trace is never empty"),
                    checkpoint: out.display().to_string(),
                    loss_csv: loss_path.display().to_string(),
                },
            )?;
        }
        Command::Generate {
            checkpoint,
            dict,
            prefix,
            steps,
        } => {
            let model = ToyModel::read_from(&mut open(&checkpoint)?)?;
            let dict = load_dictionary(&dict, model.config(), &sc)?;
            if dict.config() != model.config() {
                return Err(Error::input(
                    "dictionary and checkpoint were built with different v/m/k",
                ));
            }
            writeln!(
                stdout,
                "{}",
                greedy_generate(&prefix, &model, &dict, steps, &sc)?
            )?;
        }
        Command::Golden { out, tokens } => {
            let tokens: Vec<&str> = if tokens.is_empty() {
                GOLDEN_TOKENS.to_vec()
            } else {
                tokens.iter().map(String::as_str).collect()
            };
            with_output(out.as_deref(), stdout, |w| {
                write_golden(w, &cfg.tfree, &tokens)
            })?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    initial_loss: f64,
    final_loss: f64,
    checkpoint: String,
    loss_csv: String,
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::input(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

fn with_io_context<T>(path: &Path, r: io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    with_io_context(path, File::open(path)).map(BufReader::new)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    with_io_context(path, File::create(path)).map(BufWriter::new)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    with_io_context(path, fs::read(path))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn with_output(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            body(&mut w)?;
            w.flush()?;
        }
        None => body(stdout)?,
    }
    Ok(())
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)
        .map_err(|e| Error::Invariant(format!("serializing output: {e}")))?;
    writeln!(w)?;
    Ok(())
}

fn encode_csv(emb: &EmbeddingMatrix, tokens: &[Token], w: &mut dyn Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["position".to_string(), "kind".into(), "token".into()];
    header.extend((0..emb.hidden()).map(|i| format!("e{i}")));
    csv.write_record(&header).map_err(csv_error)?;
    for (pos, tok) in tokens.iter().enumerate() {
        let mut row = vec![pos.to_string(), tok.kind().name().into(), tok.to_string()];
        row.extend(emb.encode_token(tok).iter().map(f64::to_string));
        csv.write_record(&row).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::input(format!("writing csv: {e}"))
}

/// `TFEV`, version, token count and width as u64, then row-major f32.
fn encode_bin(emb: &EmbeddingMatrix, tokens: &[Token], w: &mut dyn Write) -> Result<()> {
    w.write_all(VECTORS_MAGIC)?;
    w.write_all(&VECTORS_VERSION.to_le_bytes())?;
    w.write_all(&(tokens.len() as u64).to_le_bytes())?;
    w.write_all(&(emb.hidden() as u64).to_le_bytes())?;
    for tok in tokens {
        for x in emb.encode_token(tok) {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// A compiled cache, recognised by its magic, or a plain word list.
fn load_dictionary(path: &Path, cfg: &TFreeConfig, sc: &SplitConfig) -> Result<Dictionary> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(DICT_MAGIC) {
        Dictionary::read_from(&mut bytes.as_slice())
    } else {
        Dictionary::compile_with(&read_wordlist(bytes.as_slice())?, cfg, sc)
    }
}

/// Numbers separated by whitespace or commas, or a JSON array.
fn read_logits(path: &Path) -> Result<Vec<f64>> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| Error::input(format!("{}: not valid UTF-8", path.display())))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())));
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::input(format!("{}: bad logit {s:?}", path.display())))
        })
        .collect()
}

fn load_documents(path: &Path) -> Result<Vec<Document>> {
    read_documents(open(path)?, DocFormat::from_path(path))
}

#[derive(serde::Deserialize)]
struct CountRecord {
    token_count: u64,
}

fn attach_counts(docs: &mut [Document], path: &Path) -> Result<()> {
    let mut n = 0;
    for (i, line) in open(path)?.lines().enumerate() {
        let line = with_io_context(path, line)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CountRecord = serde_json::from_str(&line)
            .map_err(|e| Error::input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        let doc = docs.get_mut(n).ok_or_else(|| {
            Error::input(format!(
                "{}: more count records than documents",
                path.display()
            ))
        })?;
        doc.token_count = Some(rec.token_count);
        n += 1;
    }
    if n != docs.len() {
        return Err(Error::input(format!(
            "{}: {n} count records for {} documents",
            path.display(),
            docs.len()
        )));
    }
    Ok(())
}

/// One entry per line, or the keys of a JSON object / items of a JSON array
/// for `.json` files.
fn read_vocab(path: &Path) -> Result<Vec<String>> {
    let mut text = String::new();
    with_io_context(path, open(path)?.read_to_string(&mut text))?;
    if path.extension().is_some_and(|e| e == "json") {
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        return match value {
            serde_json::Value::Object(map) => Ok(map.keys().cloned().collect()),
            serde_json::Value::Array(items) => items
                .into_iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => Ok(s),
                    _ => Err(Error::input(format!(
                        "{}: entries must be strings",
                        path.display()
                    ))),
                })
                .collect(),
            _ => Err(Error::input(format!(
                "{}: expected object or array",
                path.display()
            ))),
        };
    }
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}
