use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use outsample::diffusion::{diffusion_extend, diffusion_fit, DiffusionModel};
use outsample::measure::{random_test_indices, split};
use outsample::nystrom::{fit, run_split, ExtensionModel};
use outsample::persist::{from_json, to_json, Model};
use outsample::synth::{generate, Shape};
use outsample::SplitView;

use crate::config::{CommonArgs, KernelArgs, Settings, SplitArgs};
use crate::data::{read_table, write_rows, write_set};
use crate::error::CliError;
use crate::report::{split_report, Report};

#[derive(Parser, Debug)]
#[command(name = "outsample", version, about = "Kernel embeddings, their out-of-sample extension and its error")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a kernel embedding on a training file and save the model.
    Fit(FitArgs),
    /// Embed new points with a saved model (either kind).
    Extend(ExtendArgs),
    /// Extend to a test file, retrain on train + test and report every error estimate.
    Diagnose(DiagnoseArgs),
    /// Split one data file, run both routes (retrain and extend) and compare them.
    Compare(CompareArgs),
    /// Generate a synthetic data set.
    Synth(SynthArgs),
    /// Fit a diffusion-maps embedding and save the model.
    DiffusionFit(DiffusionFitArgs),
    /// Embed new points with a saved diffusion model, all three variants.
    DiffusionExtend(ExtendArgs),
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training data (CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Args, Debug)]
pub struct ExtendArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Points to embed (CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Embedding CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test points; the full set is the model's training set followed by these.
    #[arg(long)]
    pub data: PathBuf,
    /// Report file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// The full data set.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_parser = ["swiss-roll", "circles", "gaussian-blobs"])]
    pub shape: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, env = "OUTSAMPLE_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct DiffusionFitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(from_json(&text)?)
}

fn save_model(path: &Path, model: &Model) -> Result<(), CliError> {
    write_text(Some(path), &to_json(model)?)
}

fn no_split() -> SplitArgs {
    SplitArgs::default()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Extend(a) => cmd_extend(&a, false),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::DiffusionFit(a) => cmd_diffusion_fit(&a),
        Command::DiffusionExtend(a) => cmd_extend(&a, true),
    }
}

fn spectrum_summary(kind: &str, eigenvalues: &[f64], d: usize) -> String {
    let mut rep = Report::default();
    rep.text("kind", kind);
    rep.count("d", d);
    rep.series("eigenvalue", &eigenvalues[..eigenvalues.len().min(5)]);
    rep.render()
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &a.kernel, &no_split())?;
    let spec = s.kernel_spec()?;
    let train = read_table(&a.data, &s.measure_col)?.require_set("training")?;
    let model = fit(&train, &spec, s.rank_tol)?;
    save_model(&a.out, &Model::Nystrom(model.clone()))?;
    print!("{}", spectrum_summary("nystrom", model.spectra().eigenvalues(), model.dim()));
    Ok(())
}

pub fn cmd_diffusion_fit(a: &DiffusionFitArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &a.kernel, &no_split())?;
    if s.kernel != "gaussian" {
        return Err(CliError::Config("diffusion maps use the gaussian kernel".into()));
    }
    let train = read_table(&a.data, &s.measure_col)?.require_set("training")?;
    let model = diffusion_fit(&train, s.epsilon, s.eta, s.rank_tol)?;
    save_model(&a.out, &Model::Diffusion(model.clone()))?;
    print!("{}", spectrum_summary("diffusion", model.eigenvalues(), model.dim()));
    Ok(())
}

fn numbered(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}_{j}")).collect()
}

fn extend_nystrom(model: &ExtensionModel, points: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    Ok(model.embed(points)?)
}

fn extend_diffusion(
    model: &DiffusionModel,
    test: Option<&outsample::MeasuredSet>,
) -> Result<[DMatrix<f64>; 3], CliError> {
    let d = model.dim();
    match test {
        None => Ok([DMatrix::zeros(0, d), DMatrix::zeros(0, d), DMatrix::zeros(0, d)]),
        Some(t) => {
            let e = diffusion_extend(model, t)?;
            Ok([e.weighted, e.standard, e.normalized])
        }
    }
}

pub fn cmd_extend(a: &ExtendArgs, diffusion_only: bool) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &KernelArgs::default(), &no_split())?;
    let model = load_model(&a.model)?;
    let table = read_table(&a.data, &s.measure_col)?;
    let labels = table.labels.as_deref();
    let out = create(&a.out)?;
    match model {
        Model::Nystrom(_) if diffusion_only => {
            Err(CliError::Config("diffusion-extend needs a diffusion model".into()))
        }
        Model::Nystrom(m) => {
            if !table.is_empty() && table.points[0].len() != m.train().dim() {
                return Err(outsample::Error::Dimension(format!(
                    "test points have dimension {}, model was fitted in dimension {}",
                    table.points[0].len(),
                    m.train().dim()
                ))
                .into());
            }
            let emb = extend_nystrom(&m, &table.points)?;
            write_rows(out, &numbered("psi", m.dim()), &[&emb], labels)
        }
        Model::Diffusion(m) => {
            let test = table.to_set()?;
            let [u, psi, v] = extend_diffusion(&m, test.as_ref())?;
            let d = m.dim();
            let mut header = numbered("weighted", d);
            header.extend(numbered("standard", d));
            header.extend(numbered("normalized", d));
            write_rows(out, &header, &[&u, &psi, &v], labels)
        }
    }
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &KernelArgs::default(), &no_split())?;
    let Model::Nystrom(model) = load_model(&a.model)? else {
        return Err(CliError::Config("diagnose needs a nystrom model".into()));
    };
    let test = read_table(&a.data, &s.measure_col)?.to_set()?;
    let view = SplitView::from_parts(model.train(), test.as_ref())?;
    let run = outsample::nystrom::run_from_model(model, &view)?;
    let mut rep = Report::default();
    rep.text("command", "diagnose");
    split_report(&run, &mut rep)?;
    write_text(a.out.as_deref(), &rep.render())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let s = Settings::resolve(&a.common, &a.kernel, &a.split)?;
    let seed = s.require_seed()?;
    let spec = s.kernel_spec()?;
    let full = read_table(&a.data, &s.measure_col)?.require_set("data")?;
    let test = random_test_indices(full.len(), s.split_frac, seed)?;
    let view = split(&full, &test)?;
    let run = run_split(&view, &spec, s.rank_tol)?;
    let mut rep = Report::default();
    rep.text("command", "compare");
    rep.num("split_frac", s.split_frac);
    rep.text("seed", seed.to_string());
    let idx = if test.is_empty() {
        "none".to_string()
    } else {
        test.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
    };
    rep.text("test_indices", idx);
    split_report(&run, &mut rep)?;
    write_text(a.out.as_deref(), &rep.render())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let file = match &a.common.config {
        Some(p) => crate::config::FileConfig::load(p)?,
        None => Default::default(),
    };
    let seed = a
        .seed
        .or(file.seed)
        .ok_or_else(|| CliError::Config("synth is randomized and needs --seed".into()))?;
    let shape: Shape = a.shape.parse()?;
    let set = generate(shape, a.n, a.noise, seed)?;
    let out = create(&a.out)?;
    write_set(out, &set)
}
