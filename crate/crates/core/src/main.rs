use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meshcs::bench::{
    render_wireframe, run_cell, run_experiment, write_report, Cell, ExperimentSpec, ImageSource,
    Method, QualityReport,
};
use meshcs::imgio::{load_image, save_image};
use meshcs::metrics::{psnr, ssim, SsimParams};
use meshcs::{Error, TriMesh};

/// Compressive sampling and anisotropic mesh image representation.
#[derive(Parser)]
#[command(name = "meshcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Represent one image with one method.
    Reconstruct {
        /// Image file, `builtin:cameraman` or `phantom:<kind>:<size>`.
        #[arg(long)]
        image: String,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Config file supplying method settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// PSNR and SSIM of a test image against a reference.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also write the SSIM map here.
        #[arg(long)]
        ssim_map: Option<PathBuf>,
    },
    /// Draw a mesh file as a wireframe image.
    MeshRender {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Canvas size; defaults to the mesh bounding box.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
}

const PARTIAL_FAILURE: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(report) if report.as_ref().is_some_and(|r| r.failures() > 0) => {
            ExitCode::from(PARTIAL_FAILURE)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn summarize(report: &QualityReport) {
    for r in &report.rows {
        match &r.error {
            Some(e) => eprintln!("{} {} {}: FAILED: {e}", r.image, r.method, r.density),
            None => println!(
                "{} {} {}: PSNR {} dB, SSIM {:.4}, {} iterations, {:.1}s",
                r.image,
                r.method,
                r.density,
                r.psnr.map(|p| p.to_string()).unwrap_or_default(),
                r.ssim.unwrap_or(f64::NAN),
                r.iterations,
                r.wall_time_s
            ),
        }
    }
}

fn execute(cmd: Command) -> Result<Option<QualityReport>, Error> {
    match cmd {
        Command::Run { config, out } => {
            let mut spec = ExperimentSpec::load(&config)?;
            if let Some(out) = out {
                spec.output_dir = out;
            }
            let report = run_experiment(&spec)?;
            let (csv, md) = write_report(&report, &spec.output_dir)?;
            summarize(&report);
            println!("wrote {} and {}", csv.display(), md.display());
            Ok(Some(report))
        }
        Command::Reconstruct {
            image,
            method,
            density,
            seed,
            out,
            config,
        } => {
            let mut spec = match config {
                Some(p) => ExperimentSpec::load(p)?,
                None => ExperimentSpec::default(),
            };
            let src: ImageSource = image.parse()?;
            spec.images = vec![src.clone()];
            spec.methods = vec![method];
            spec.densities = vec![density];
            spec.output_dir = out.clone();
            spec.validate()?;
            let img = src.load()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let cell = Cell {
                image: src.name(),
                method,
                density,
                seed,
            };
            let report = QualityReport {
                rows: vec![run_cell(&img, &cell, &spec, &out)],
            };
            write_report(&report, &out)?;
            summarize(&report);
            Ok(Some(report))
        }
        Command::Metrics {
            reference,
            test,
            ssim_map,
        } => {
            let a = load_image(&reference)?;
            let b = load_image(&test)?;
            let p = psnr(&a, &b)?;
            let s = ssim(&a, &b, &SsimParams::default())?;
            println!("psnr_db {p}");
            println!("ssim {}", s.mean_ssim);
            if let Some(path) = ssim_map {
                save_image(&s.map_image(), path)?;
            }
            Ok(None)
        }
        Command::MeshRender {
            mesh,
            out,
            width,
            height,
        } => {
            let mesh = TriMesh::load_text(&mesh)?;
            let rect = mesh.bounding_rect();
            let w = width.unwrap_or(rect.xmax.round() as usize + 1);
            let h = height.unwrap_or(rect.ymax.round() as usize + 1);
            if w < 2 || h < 2 {
                return Err(Error::InvalidDimensions {
                    width: w,
                    height: h,
                });
            }
            save_image(&render_wireframe(&mesh, w, h), out)?;
            Ok(None)
        }
    }
}
