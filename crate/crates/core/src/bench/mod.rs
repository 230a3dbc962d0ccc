//! Seeded benchmark harness: every (image, method, density) cell is run,
//! scored with PSNR and SSIM, and written out with its reconstruction,
//! SSIM map and, for meshes, the mesh file and a wireframe rendering.

mod phantom;
mod render;
mod report;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use phantom::{ramp, shepp_logan, step_edge, two_region, Phantom};
pub use render::{line_pixels, render_wireframe};
pub use report::{strip_timing, write_report, QualityReport, ReportRow, CSV_HEADER};

use crate::ama::{ama_represent, AmaConfig};
use crate::cs::{
    build_measurement_op_with, measure_seeded, reconstruct_ista, reconstruct_tveq, SamplingPattern,
    SensingDomain, SolverConfig,
};
use crate::error::{Error, Result};
use crate::imgio::{decode_image, load_image, save_image, GrayImage};
use crate::metrics::{psnr, ssim, SsimParams};

/// Environment variable overriding [`ExperimentSpec::workers`].
pub const WORKERS_ENV: &str = "MESHCS_WORKERS";

static CAMERAMAN_PGM: &[u8] = include_bytes!("../../data/cameraman.pgm");

/// The bundled 256x256 cameraman test image.
pub fn cameraman() -> GrayImage {
    decode_image(CAMERAMAN_PGM).expect("bundled image decodes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tveq,
    Ista,
    Ama,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tveq, Method::Ista, Method::Ama];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tveq => "tveq",
            Method::Ista => "ista",
            Method::Ama => "ama",
        }
    }

    /// Display name for tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Tveq => "TVeq",
            Method::Ista => "ISTA",
            Method::Ama => "AMA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Where a benchmark image comes from.
///
/// Written in config files as a string: `builtin:cameraman`,
/// `phantom:<kind>:<size>` (square) or a file path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ImageSource {
    Cameraman,
    Phantom { kind: Phantom, size: usize },
    File(PathBuf),
}

impl ImageSource {
    /// Short name used in reports and output file names.
    pub fn name(&self) -> String {
        match self {
            ImageSource::Cameraman => "cameraman".into(),
            ImageSource::Phantom { kind, size } => format!("{kind}-{size}"),
            ImageSource::File(p) => p.file_stem().map_or_else(
                || p.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            ),
        }
    }

    pub fn load(&self) -> Result<GrayImage> {
        match self {
            ImageSource::Cameraman => Ok(cameraman()),
            ImageSource::Phantom { kind, size } => kind.render(*size, *size),
            ImageSource::File(p) => load_image(p),
        }
    }
}

impl fmt::Display for ImageSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageSource::Cameraman => f.write_str("builtin:cameraman"),
            ImageSource::Phantom { kind, size } => write!(f, "phantom:{kind}:{size}"),
            ImageSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for ImageSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("builtin:") {
            return match name {
                "cameraman" => Ok(ImageSource::Cameraman),
                _ => Err(Error::Config(format!("unknown builtin image {name:?}"))),
            };
        }
        if let Some(rest) = s.strip_prefix("phantom:") {
            let (kind, size) = rest.split_once(':').unwrap_or((rest, "256"));
            let size = size
                .parse()
                .map_err(|_| Error::Config(format!("bad phantom size in {s:?}")))?;
            return Ok(ImageSource::Phantom {
                kind: kind.parse()?,
                size,
            });
        }
        Ok(ImageSource::File(PathBuf::from(s)))
    }
}

impl Serialize for ImageSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ImageSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Measurement settings shared by the two compressive-sampling methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    pub domain: SensingDomain,
    pub pattern: SamplingPattern,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            domain: SensingDomain::Fourier,
            pattern: SamplingPattern::VariableDensity { decay: 3.0 },
        }
    }
}

/// A full benchmark: images x methods x densities, plus per-method
/// settings. The density and seed fields inside `ama` are replaced per
/// cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub images: Vec<ImageSource>,
    pub densities: Vec<f64>,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Cells run concurrently; [`WORKERS_ENV`] overrides this.
    pub workers: usize,
    pub sensing: SensingConfig,
    pub tveq: SolverConfig,
    pub ista: SolverConfig,
    pub ama: AmaConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            images: vec![ImageSource::Cameraman],
            densities: vec![0.03, 0.10],
            methods: Method::ALL.to_vec(),
            master_seed: 0,
            output_dir: PathBuf::from("meshcs-out"),
            workers: 1,
            sensing: SensingConfig::default(),
            tveq: SolverConfig::tveq(),
            ista: SolverConfig::ista(),
            ama: AmaConfig::default(),
        }
    }
}

/// One unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub image: String,
    pub method: Method,
    pub density: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::Config("no images given".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        if self.densities.is_empty() {
            return Err(Error::Config("no densities given".into()));
        }
        if let Some(d) = self.densities.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return Err(Error::Config(format!("density {d} outside (0, 1]")));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let mut names = HashMap::new();
        for src in &self.images {
            if let Some(prev) = names.insert(src.name(), src) {
                return Err(Error::Config(format!(
                    "images {prev} and {src} share the name {:?}",
                    src.name()
                )));
            }
        }
        self.tveq.validate()?;
        self.ista.validate()?;
        AmaConfig {
            sample_density: self.densities[0],
            ..self.ama.clone()
        }
        .validate()?;
        Ok(())
    }

    /// Parses a TOML document; unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative image paths and the output
    /// directory are taken relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for src in &mut spec.images {
            if let ImageSource::File(p) = src {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if spec.output_dir.is_relative() {
            spec.output_dir = base.join(&spec.output_dir);
        }
        Ok(spec)
    }

    /// Worker count after applying the environment override.
    pub fn effective_workers(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))
                }),
            Err(_) => Ok(self.workers),
        }
    }

    /// Cells in report order: image, then density, then method.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        for src in &self.images {
            let image = src.name();
            for &density in &self.densities {
                for &method in &self.methods {
                    let seed = child_seed(self.master_seed, &image, method, density);
                    cells.push(Cell {
                        image: image.clone(),
                        method,
                        density,
                        seed,
                    });
                }
            }
        }
        let mut seen: HashMap<u64, &Cell> = HashMap::new();
        for c in &cells {
            if let Some(prev) = seen.insert(c.seed, c) {
                return Err(Error::Config(format!(
                    "seed collision between {prev:?} and {c:?}"
                )));
            }
        }
        Ok(cells)
    }
}

/// Stable per-cell seed: the first 8 bytes of SHA-256 over the master
/// seed and the cell identity.
pub fn child_seed(master: u64, image: &str, method: Method, density: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((image.len() as u64).to_le_bytes());
    h.update(image.as_bytes());
    h.update(method.name().as_bytes());
    h.update(density.to_bits().to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Raw output of one method on one image.
#[derive(Debug, Clone)]
pub struct MethodOutput {
    /// Reconstruction quantized to integer grey levels.
    pub image: GrayImage,
    pub iterations: usize,
    pub converged: bool,
    pub mesh: Option<crate::mesh::TriMesh>,
}

/// Runs one method on `img` without touching the filesystem.
pub fn run_method(
    img: &GrayImage,
    method: Method,
    density: f64,
    seed: u64,
    spec: &ExperimentSpec,
) -> Result<MethodOutput> {
    match method {
        Method::Tveq | Method::Ista => {
            let op = build_measurement_op_with(
                img.width(),
                img.height(),
                density,
                spec.sensing.domain,
                spec.sensing.pattern,
                seed,
            )?;
            let meas = measure_seeded(img, &op, seed)?;
            let rec = if method == Method::Tveq {
                reconstruct_tveq(&meas, &spec.tveq)?
            } else {
                reconstruct_ista(&meas, &spec.ista)?
            };
            Ok(MethodOutput {
                image: rec.image.quantized(),
                iterations: rec.iterations,
                converged: rec.converged,
                mesh: None,
            })
        }
        Method::Ama => {
            let cfg = AmaConfig {
                sample_density: density,
                seed,
                ..spec.ama.clone()
            };
            let res = ama_represent(img, &cfg)?;
            Ok(MethodOutput {
                image: res.image.quantized(),
                iterations: cfg.outer_iterations,
                converged: true,
                mesh: Some(res.mesh),
            })
        }
    }
}

/// Runs one cell, writes its output images into `out_dir` and returns
/// its report row. Failures end up in the row's error field.
pub fn run_cell(img: &GrayImage, cell: &Cell, spec: &ExperimentSpec, out_dir: &Path) -> ReportRow {
    let start = Instant::now();
    let mut row = ReportRow {
        image: cell.image.clone(),
        width: img.width(),
        height: img.height(),
        method: cell.method,
        density: cell.density,
        psnr: None,
        ssim: None,
        iterations: 0,
        converged: false,
        seed: cell.seed,
        error: None,
        wall_time_s: 0.0,
    };
    let result = (|| -> Result<()> {
        let out = run_method(img, cell.method, cell.density, cell.seed, spec)?;
        row.iterations = out.iterations;
        row.converged = out.converged;
        let s = ssim(img, &out.image, &SsimParams::default())?;
        row.psnr = Some(psnr(img, &out.image)?);
        row.ssim = Some(s.mean_ssim);
        let stem = format!("{}_{}_{}", cell.image, cell.method, cell.density);
        save_image(&out.image, out_dir.join(format!("{stem}.pgm")))?;
        save_image(&s.map_image(), out_dir.join(format!("{stem}_ssim.pgm")))?;
        if let Some(mesh) = &out.mesh {
            mesh.save_text(out_dir.join(format!("{stem}.mesh")))?;
            let wire = render_wireframe(mesh, img.width(), img.height());
            save_image(&wire, out_dir.join(format!("{stem}_wireframe.pgm")))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row.wall_time_s = start.elapsed().as_secs_f64();
    row
}

/// Runs every cell of `spec`, writes per-cell outputs into the output
/// directory and returns the report in cell order. Reports are not
/// written; see [`write_report`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<QualityReport> {
    spec.validate()?;
    let workers = spec.effective_workers()?;
    let cells = spec.cells()?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let images: HashMap<String, std::result::Result<GrayImage, String>> = spec
        .images
        .iter()
        .map(|src| (src.name(), src.load().map_err(|e| e.to_string())))
        .collect();

    let run = |cell: &Cell| match &images[&cell.image] {
        Ok(img) => run_cell(img, cell, spec, dir),
        Err(e) => ReportRow {
            image: cell.image.clone(),
            width: 0,
            height: 0,
            method: cell.method,
            density: cell.density,
            psnr: None,
            ssim: None,
            iterations: 0,
            converged: false,
            seed: cell.seed,
            error: Some(e.clone()),
            wall_time_s: 0.0,
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| cells.par_iter().map(run).collect());
    Ok(QualityReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_round_trips_through_toml() {
        let spec = ExperimentSpec::default();
        let text = spec.to_toml().unwrap();
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec);
        assert_eq!(ExperimentSpec::from_toml("").unwrap(), spec);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let spec = ExperimentSpec::from_toml(
            r#"
            images = ["phantom:shepp-logan:64", "data/x.png"]
            methods = ["ama"]
            [ama]
            outer_iterations = 2
            [sensing]
            domain = "dct"
            pattern = { kind = "uniform" }
            "#,
        )
        .unwrap();
        assert_eq!(spec.densities, [0.03, 0.10]);
        assert_eq!(spec.ama.outer_iterations, 2);
        assert_eq!(spec.ama.smoothing_passes, 20);
        assert_eq!(spec.sensing.pattern, SamplingPattern::Uniform);
        assert_eq!(spec.images[1], ImageSource::File("data/x.png".into()));
        assert!(ExperimentSpec::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn image_source_strings() {
        for s in ["builtin:cameraman", "phantom:ramp:128", "a/b.pgm"] {
            assert_eq!(s.parse::<ImageSource>().unwrap().to_string(), s);
        }
        assert_eq!(
            "phantom:ramp:128".parse::<ImageSource>().unwrap().name(),
            "ramp-128"
        );
        assert!("builtin:lena".parse::<ImageSource>().is_err());
        assert!("phantom:ramp:x".parse::<ImageSource>().is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentSpec::default();
        assert!(ok.validate().is_ok());
        let cases = [
            ExperimentSpec {
                methods: vec![],
                ..ok.clone()
            },
            ExperimentSpec {
                images: vec![],
                ..ok.clone()
            },
            ExperimentSpec {
                densities: vec![0.0],
                ..ok.clone()
            },
            ExperimentSpec {
                densities: vec![1.5],
                ..ok.clone()
            },
            ExperimentSpec {
                workers: 0,
                ..ok.clone()
            },
            ExperimentSpec {
                images: vec!["a/x.pgm".parse().unwrap(), "b/x.png".parse().unwrap()],
                ..ok.clone()
            },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn child_seeds_depend_on_every_component() {
        let base = child_seed(1, "img", Method::Ama, 0.1);
        assert_eq!(base, child_seed(1, "img", Method::Ama, 0.1));
        assert_ne!(base, child_seed(2, "img", Method::Ama, 0.1));
        assert_ne!(base, child_seed(1, "img2", Method::Ama, 0.1));
        assert_ne!(base, child_seed(1, "img", Method::Ista, 0.1));
        assert_ne!(base, child_seed(1, "img", Method::Ama, 0.03));
    }

    #[test]
    fn adding_a_method_keeps_other_seeds() {
        let a = ExperimentSpec {
            methods: vec![Method::Tveq],
            ..Default::default()
        };
        let b = ExperimentSpec::default();
        let seeds_b = b.cells().unwrap();
        for c in a.cells().unwrap() {
            assert!(seeds_b.contains(&c));
        }
    }

    #[test]
    fn bundled_cameraman() {
        let img = cameraman();
        assert_eq!(img.dims(), (256, 256));
    }
}
