use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tfree", version, about = "Tokenizer-free trigram text codec")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// key=value file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Named parameter preset (`3b`: m=7, k=3).
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Number of embedding rows.
    #[arg(long, global = true)]
    pub v: Option<usize>,

    /// Hash rounds per trigram.
    #[arg(long, global = true)]
    pub m: Option<usize>,

    /// Rounds computed on the lowercased trigram.
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Worker threads for analysis commands.
    #[arg(long, global = true, env = "TFREE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the token stream of a file, one `kind<TAB>text` line per token.
    Split { file: PathBuf },

    /// Print the sorted active rows of one token.
    Pattern { token: String },

    /// Embed every token of a file.
    Encode {
        file: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = EncodeFormat::Csv)]
        format: EncodeFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Compile a word list into a dictionary cache.
    CompileDict {
        wordlist: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Decode a logit vector against a dictionary.
    Decode {
        #[arg(long)]
        logits: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        top: Option<usize>,
    },

    /// Tokens per reference word over a corpus.
    Fertility {
        corpus: PathBuf,
        /// JSONL with one `token_count` per corpus document, in order.
        #[arg(long)]
        counts: Option<PathBuf>,
    },

    /// Audit a vocabulary for duplicate entries.
    Dupes {
        #[arg(required_unless_present = "tfree")]
        vocab: Option<PathBuf>,
        #[arg(long, required_unless_present = "tfree")]
        ws_marker: Option<char>,
        /// Report on the hashed embedding table instead of a vocabulary file.
        #[arg(long)]
        tfree: bool,
    },

    /// Word length, word frequency and trigram frequency coverage curves.
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Train the toy next-word model.
    TrainToy {
        corpus: PathBuf,
        #[arg(long)]
        h: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        context: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },

    /// Greedy generation from a toy checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dictionary cache or plain word list.
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        prefix: String,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },

    /// Write trigram conformance vectors.
    Golden {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tokens to include; defaults to the built-in list.
        tokens: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodeFormat {
    Csv,
    Bin,
}
