use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use tfree_core::objective::ToyHyper;
use tfree_core::trigram::{DEFAULT_K, DEFAULT_M, DEFAULT_V};
use tfree_core::{Error, Result, TFreeConfig};

use crate::args::GlobalArgs;

const KEYS: &[&str] = &[
    "preset", "v", "m", "k", "threads", "h", "steps", "lr", "seed", "context",
];

/// Values from a `key=value` config file.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::input(format!("config line {}: expected key=value", n + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::input(format!(
                    "config line {}: unknown key {key:?}",
                    n + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|_| Error::input(format!("config: bad value for {key}: {raw:?}")))
            })
            .transpose()
    }
}

/// Flag value if given, otherwise the config file value.
pub fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

pub struct Resolved {
    pub file: ConfigFile,
    pub tfree: TFreeConfig,
    pub threads: Option<usize>,
}

impl Resolved {
    pub fn new(global: &GlobalArgs) -> Result<Self> {
        let file = match &global.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let (mut v, mut m, mut k) = (DEFAULT_V, DEFAULT_M, DEFAULT_K);
        match pick(global.preset.clone(), &file, "preset")?.as_deref() {
            None => {}
            Some("3b") => {
                let p = TFreeConfig::preset_3b();
                (v, m, k) = (p.v(), p.m(), p.k());
            }
            Some(other) => return Err(Error::input(format!("unknown preset {other:?}"))),
        }
        v = pick(global.v, &file, "v")?.unwrap_or(v);
        m = pick(global.m, &file, "m")?.unwrap_or(m);
        k = pick(global.k, &file, "k")?.unwrap_or(k);
        let tfree = TFreeConfig::new(v, m, k)?;
        let threads = pick(global.threads, &file, "threads")?;
        if threads == Some(0) {
            return Err(Error::input("threads must be at least 1"));
        }
        Ok(Self {
            file,
            tfree,
            threads,
        })
    }

    pub fn toy_hyper(
        &self,
        h: Option<usize>,
        steps: Option<usize>,
        lr: Option<f64>,
        seed: Option<u64>,
        context: Option<usize>,
    ) -> Result<ToyHyper> {
        let d = ToyHyper::default();
        Ok(ToyHyper {
            hidden: pick(h, &self.file, "h")?.unwrap_or(d.hidden),
            steps: pick(steps, &self.file, "steps")?.unwrap_or(d.steps),
            lr: pick(lr, &self.file, "lr")?.unwrap_or(d.lr),
            seed: pick(seed, &self.file, "seed")?.unwrap_or(d.seed),
            context_window: pick(context, &self.file, "context")?.unwrap_or(d.context_window),
        })
    }
}
