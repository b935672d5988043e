use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use geoseg::clustering::{FcmConfig, KmeansConfig};
use geoseg::ede_removal::EdeConfig;
use geoseg::filters::{AdParams, NlmParams, SmoothMethod};
use geoseg::supervised::{EnsembleMethod, EnsembleParams, LssvmParams, Trainer};
use geoseg::volume::{ByteOrder, VtkEncoding};
use geoseg::Roi;
use geoseg_service::config::{
    AnalyzeOp, AnalyzeSpec, AsLabelsSpec, ClassifySpec, ExportFormat, ExportSpec, Layer, SmoothSpec, TableSource,
};
use geoseg_service::{manifest, RunConfig, Source, Stage};

#[derive(Parser)]
#[command(name = "geoseg", version, about = "Segmentation and petrophysics for micro-CT volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a TOML run config and write a manifest.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-run a manifest and compare every digest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long, env = "GEOSEG_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "GEOSEG_DATA_DIR", default_value = "geoseg-data")]
        data_dir: PathBuf,
    },
    /// Denoise or smooth a volume and export it as raw.
    Filter {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "dual")]
        method: FilterMethod,
        /// Window radius of the smoothing filters.
        #[arg(long, default_value_t = 1)]
        radius: usize,
    },
    /// Cluster a volume and export the labels.
    Segment {
        #[command(flatten)]
        input: InputArgs,
        #[arg(value_enum)]
        method: ClusterMethod,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Membership exponent for fcm.
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Remove edge-enhancement halos by dual clustering and export the labels.
    EdePipeline {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 7)]
        k1: usize,
        /// Slices used for the over-clustering step, comma separated.
        #[arg(long, value_delimiter = ',')]
        seg_slices: Vec<usize>,
        /// Label ranges per phase, e.g. "noise=0,edl=1-2,brine=1-3,quartz=4,edh=5,hydrate=6-7".
        #[arg(long)]
        map: Option<String>,
    },
    /// Train a classifier on picked pixels and label the whole volume.
    Classify {
        #[command(flatten)]
        input: InputArgs,
        /// Training table, CSV `class,feature,x,y,slice` or JSON.
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_enum, default_value = "lssvm")]
        trainer: TrainerKind,
        #[arg(long, default_value_t = 10.0)]
        gamma: f64,
        #[arg(long, default_value_t = 36.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 50)]
        learners: usize,
    },
    /// Porosity, fractions, trend, PSD or REV of an 8-bit label volume.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        /// Analyses to run, comma separated.
        #[arg(value_delimiter = ',', required = true)]
        ops: Vec<AnalyzeOp>,
        #[arg(long, default_value_t = 1)]
        pore_class: u8,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Raw volume file, or one TIFF image per slice.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Raw geometry as NX,NY,NZ.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    bits: u32,
    #[arg(long, value_enum, default_value = "little")]
    byte_order: Order,
    #[arg(long, default_value_t = 1.0)]
    voxel_size: f64,
    /// Crop box as X0,Y0,Z0,DX,DY,DZ.
    #[arg(long, value_delimiter = ',')]
    roi: Vec<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Little,
    Big,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterMethod {
    /// Anisotropic diffusion followed by non-local means.
    Dual,
    Nlm,
    Ad,
    Median,
    Mean,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusterMethod {
    Kmeans,
    Fcm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainerKind {
    Lssvm,
    Bagging,
    Adaboost,
}

impl InputArgs {
    fn source(&self) -> Result<Source> {
        let tiff = self.input.iter().all(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("tif") || e.eq_ignore_ascii_case("tiff"))
        });
        if tiff {
            return Ok(Source::Tiff {
                paths: self.input.clone(),
                voxel_size: self.voxel_size,
            });
        }
        if self.input.len() != 1 {
            bail!("give one raw file, or TIFF slices only");
        }
        let [nx, ny, nz] = self.dims[..] else {
            bail!("raw input needs --dims NX,NY,NZ");
        };
        Ok(Source::Raw {
            path: self.input[0].clone(),
            dims: [nx, ny, nz],
            bits: self.bits,
            byte_order: match self.byte_order {
                Order::Little => ByteOrder::Little,
                Order::Big => ByteOrder::Big,
            },
            voxel_size: self.voxel_size,
            transpose_slices: false,
        })
    }

    fn config(&self, stages: Vec<Stage>) -> Result<RunConfig> {
        let roi = match self.roi[..] {
            [] => None,
            [x0, y0, z0, dx, dy, dz] => Some(Roi::new(x0, y0, z0, dx, dy, dz)),
            _ => bail!("--roi needs X0,Y0,Z0,DX,DY,DZ"),
        };
        let cfg = RunConfig {
            input: self.source()?,
            roi,
            stages,
        };
        cfg.validate("command line")?;
        Ok(cfg)
    }

    fn run(&self, stages: Vec<Stage>) -> Result<()> {
        let cfg = self.config(stages)?;
        let m = manifest::run(&cfg, &self.out, self.threads)?;
        report(&m, &self.out);
        Ok(())
    }
}

fn export(layer: Layer, format: ExportFormat, file: &str) -> Stage {
    Stage::Export(ExportSpec {
        layer,
        format,
        file: file.into(),
        encoding: VtkEncoding::Binary,
        byte_order: ByteOrder::Little,
        pore_class: 1,
    })
}

fn report(m: &manifest::Manifest, out: &Path) {
    for s in &m.stages {
        println!("stage {:>2} {:<10} {}", s.index, s.op, s.product);
        for f in &s.files {
            println!("         {}", out.join(&f.path).display());
        }
    }
    println!(
        "manifest {} ({} ms, {} threads)",
        out.join(manifest::MANIFEST_FILE).display(),
        m.elapsed_ms,
        m.threads
    );
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads } => {
            let cfg = RunConfig::load(&config)?;
            let m = manifest::run(&cfg, &out, threads)?;
            report(&m, &out);
        }
        Command::Replay { manifest: path, out, threads } => {
            let m = manifest::Manifest::load(&path)?;
            let r = manifest::replay(&m, &out, threads)?;
            report(&r.replayed, &out);
            if !r.identical() {
                for line in &r.mismatches {
                    eprintln!("mismatch: {line}");
                }
                bail!("replay differs from {}", path.display());
            }
            println!("replay identical to {}", path.display());
        }
        Command::Serve { bind, data_dir } => serve(bind, data_dir)?,
        Command::Filter { input, method, radius } => {
            let smooth = |method| {
                Stage::Smooth(SmoothSpec {
                    method,
                    radius,
                    sigma: None,
                })
            };
            let mut stages = match method {
                FilterMethod::Dual => vec![Stage::Ad(AdParams::default()), Stage::Nlm(NlmParams::default())],
                FilterMethod::Nlm => vec![Stage::Nlm(NlmParams::default())],
                FilterMethod::Ad => vec![Stage::Ad(AdParams::default())],
                FilterMethod::Median => vec![smooth(SmoothMethod::Median)],
                FilterMethod::Mean => vec![smooth(SmoothMethod::Mean)],
                FilterMethod::Gaussian => vec![smooth(SmoothMethod::Gaussian)],
            };
            stages.push(export(Layer::Volume, ExportFormat::Raw, "filtered.raw"));
            input.run(stages)?;
        }
        Command::Segment {
            input,
            method,
            k,
            m,
            restarts,
            seed,
        } => {
            let stage = match method {
                ClusterMethod::Kmeans => Stage::Kmeans(KmeansConfig {
                    k,
                    restarts,
                    seed,
                    ..Default::default()
                }),
                ClusterMethod::Fcm => Stage::Fcm(FcmConfig {
                    seed,
                    ..FcmConfig::with_c(k, m)
                }),
            };
            input.run(vec![
                stage,
                export(Layer::Labels, ExportFormat::Raw, "labels.raw"),
                export(Layer::Labels, ExportFormat::Vtk, "labels.vtk"),
            ])?;
        }
        Command::EdePipeline {
            input,
            k1,
            seg_slices,
            map,
        } => {
            let mut cfg = EdeConfig {
                k1,
                seg_slices,
                ..Default::default()
            };
            if let Some(m) = map {
                cfg.map = m.parse().context("--map")?;
            }
            input.run(vec![
                Stage::Ede(cfg),
                export(Layer::Labels, ExportFormat::Raw, "labels.raw"),
                export(Layer::Labels, ExportFormat::Vtk, "labels.vtk"),
            ])?;
        }
        Command::Classify {
            input,
            table,
            trainer,
            gamma,
            sigma2,
            learners,
        } => {
            let trainer = match trainer {
                TrainerKind::Lssvm => Trainer::Lssvm(LssvmParams::new(gamma, sigma2)),
                TrainerKind::Bagging => Trainer::Ensemble(EnsembleParams {
                    n_learners: learners,
                    ..EnsembleParams::default()
                }),
                TrainerKind::Adaboost => Trainer::Ensemble(EnsembleParams {
                    method: EnsembleMethod::AdaBoost,
                    n_learners: learners,
                    ..EnsembleParams::default()
                }),
            };
            input.run(vec![
                Stage::Classify(ClassifySpec {
                    table: TableSource::Path(table),
                    trainer,
                }),
                export(Layer::Labels, ExportFormat::Raw, "labels.raw"),
                export(Layer::Labels, ExportFormat::Vtk, "labels.vtk"),
            ])?;
        }
        Command::Analyze { input, ops, pore_class } => {
            input.run(vec![
                Stage::AsLabels(AsLabelsSpec::default()),
                Stage::Analyze(AnalyzeSpec {
                    pore_class,
                    ..AnalyzeSpec::new(ops)
                }),
            ])?;
        }
    }
    Ok(())
}

fn serve(bind: SocketAddr, data_dir: PathBuf) -> Result<()> {
    std::fs::create_dir_all(&data_dir).with_context(|| format!("creating {}", data_dir.display()))?;
    let registry = Arc::new(geoseg_service::Registry::new(data_dir));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .with_context(|| format!("binding {bind}"))?;
        eprintln!("geoseg listening on http://{}", listener.local_addr()?);
        axum::serve(listener, geoseg_service::api::router(registry)).await?;
        Ok(())
    })
}
