//! Python bindings for `meshcs`.

use std::path::PathBuf;

use meshcs::ama::{ama_represent, AmaConfig};
use meshcs::bench::{self, ExperimentSpec, Method, Phantom};
use meshcs::cs::{self, SamplingPattern, SensingDomain, SolverConfig};
use meshcs::metrics::{self, Psnr, SsimParams};
use meshcs::{Error, GrayImage, Point, TriMesh};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

/// Grayscale image with intensities stored as floats, row-major.
#[pyclass(name = "Image", module = "meshcs", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: GrayImage,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        GrayImage::new(width, height, data)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Reads a PGM or PNG file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        meshcs::imgio::load_image(path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// The bundled 256x256 test image.
    #[staticmethod]
    fn cameraman() -> Self {
        Self {
            inner: bench::cameraman(),
        }
    }

    /// Synthetic test image: `shepp-logan`, `two-region`, `step-edge` or `ramp`.
    #[staticmethod]
    fn phantom(kind: &str, width: usize, height: usize) -> PyResult<Self> {
        parse::<Phantom>(kind)?
            .render(width, height)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Writes the image, rounded to 8 bits, as PGM or PNG by extension.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        meshcs::imgio::save_image(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f64> {
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err("pixel index out of range"));
        }
        Ok(self.inner.get(row, col))
    }

    fn quantized(&self) -> Self {
        Self {
            inner: self.inner.quantized(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Triangle mesh with optional per-vertex values.
#[pyclass(name = "Mesh", module = "meshcs", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMesh {
    inner: TriMesh,
}

#[pymethods]
impl PyMesh {
    /// Delaunay triangulation of `(x, y)` points.
    #[staticmethod]
    fn delaunay(points: Vec<(f64, f64)>) -> PyResult<Self> {
        let pts: Vec<Point> = points.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        meshcs::mesh::delaunay(&pts)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        TriMesh::load_text(path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_text(path).map_err(to_py)
    }

    /// Copy of the mesh carrying the image values sampled at each vertex.
    fn with_values_from(&self, image: &PyImage) -> PyResult<Self> {
        meshcs::mesh::assign_values(&self.inner, &image.inner)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    fn triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .triangles()
            .iter()
            .map(|&[a, b, c]| (a, b, c))
            .collect()
    }

    fn values(&self) -> Option<Vec<f64>> {
        self.inner.values().map(<[f64]>::to_vec)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_triangles(&self) -> usize {
        self.inner.num_triangles()
    }

    /// Piecewise-linear value at `(x, y)`.
    fn interpolate(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.interpolate(Point::new(x, y)).map_err(to_py)
    }

    fn rasterize(&self, width: usize, height: usize) -> PyResult<PyImage> {
        self.inner
            .rasterize(width, height)
            .map(|inner| PyImage { inner })
            .map_err(to_py)
    }

    /// Black edges on a white background.
    fn wireframe(&self, width: usize, height: usize) -> PyImage {
        PyImage {
            inner: bench::render_wireframe(&self.inner, width, height),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh({} vertices, {} triangles)",
            self.inner.num_vertices(),
            self.inner.num_triangles()
        )
    }
}

/// Partial transform-domain samples of an image.
#[pyclass(name = "Measurements", module = "meshcs", frozen)]
pub struct PyMeasurements {
    inner: cs::Measurements,
}

#[pymethods]
impl PyMeasurements {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        cs::Measurements::load(path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn kept_indices(&self) -> Vec<usize> {
        self.inner.op().kept_indices().to_vec()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.op().density()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn __repr__(&self) -> String {
        let (w, h) = self.inner.op().dims();
        format!("Measurements({} of {w}x{h})", self.inner.op().m())
    }
}

/// Result of a reconstruction or representation run.
#[pyclass(name = "Reconstruction", module = "meshcs", frozen, get_all)]
pub struct PyReconstruction {
    image: PyImage,
    iterations: usize,
    converged: bool,
    mesh: Option<PyMesh>,
}

/// PSNR in dB; identical images give `inf`.
#[pyfunction]
fn psnr(reference: &PyImage, test: &PyImage) -> PyResult<f64> {
    metrics::psnr(&reference.inner, &test.inner)
        .map(|p| match p {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        })
        .map_err(to_py)
}

/// Mean SSIM and the per-pixel map rendered as an 8-bit image.
#[pyfunction]
#[pyo3(signature = (reference, test, window=11, sigma=1.5))]
fn ssim(
    reference: &PyImage,
    test: &PyImage,
    window: usize,
    sigma: f64,
) -> PyResult<(f64, PyImage)> {
    let params = SsimParams {
        window,
        sigma,
        dynamic_range: reference.inner.peak(),
        ..SsimParams::default()
    };
    let res = metrics::ssim(&reference.inner, &test.inner, &params).map_err(to_py)?;
    Ok((
        res.mean_ssim,
        PyImage {
            inner: res.map_image(),
        },
    ))
}

/// Adaptive anisotropic mesh representation of an image.
#[pyfunction]
#[pyo3(signature = (image, density, seed=0, outer_iterations=None, smoothing_passes=None))]
fn ama(
    image: &PyImage,
    density: f64,
    seed: u64,
    outer_iterations: Option<usize>,
    smoothing_passes: Option<usize>,
) -> PyResult<PyReconstruction> {
    let mut cfg = AmaConfig::with_density(density, seed);
    if let Some(n) = outer_iterations {
        cfg.outer_iterations = n;
    }
    if let Some(n) = smoothing_passes {
        cfg.smoothing_passes = n;
    }
    let res = ama_represent(&image.inner, &cfg).map_err(to_py)?;
    Ok(PyReconstruction {
        image: PyImage { inner: res.image },
        iterations: cfg.outer_iterations,
        converged: true,
        mesh: Some(PyMesh { inner: res.mesh }),
    })
}

/// Samples a fraction `density` of the image's transform coefficients.
#[pyfunction]
#[pyo3(signature = (image, density, seed=0, domain="fourier", decay=None))]
fn measure(
    image: &PyImage,
    density: f64,
    seed: u64,
    domain: &str,
    decay: Option<f64>,
) -> PyResult<PyMeasurements> {
    let domain: SensingDomain = parse(domain)?;
    let pattern = decay.map_or(SamplingPattern::Uniform, |decay| {
        SamplingPattern::VariableDensity { decay }
    });
    let img = &image.inner;
    let op =
        cs::build_measurement_op_with(img.width(), img.height(), density, domain, pattern, seed)
            .map_err(to_py)?;
    cs::measure_seeded(img, &op, seed)
        .map(|inner| PyMeasurements { inner })
        .map_err(to_py)
}

/// Recovers an image from measurements with `ista` or `tveq`.
#[pyfunction]
#[pyo3(signature = (measurements, method, max_iterations=None))]
fn reconstruct(
    measurements: &PyMeasurements,
    method: &str,
    max_iterations: Option<usize>,
) -> PyResult<PyReconstruction> {
    let (mut cfg, solve): (_, fn(&cs::Measurements, &SolverConfig) -> meshcs::Result<_>) =
        match parse::<Method>(method)? {
            Method::Ista => (SolverConfig::ista(), cs::reconstruct_ista),
            Method::Tveq => (SolverConfig::tveq(), cs::reconstruct_tveq),
            Method::Ama => {
                return Err(PyValueError::new_err(
                    "ama works on images, not measurements; use meshcs.ama",
                ))
            }
        };
    if let Some(n) = max_iterations {
        cfg.max_iterations = n;
    }
    let rec = solve(&measurements.inner, &cfg).map_err(to_py)?;
    Ok(PyReconstruction {
        image: PyImage { inner: rec.image },
        iterations: rec.iterations,
        converged: rec.converged,
        mesh: None,
    })
}

/// One method at one density with the default experiment settings.
#[pyfunction]
#[pyo3(signature = (image, method, density, seed=0))]
fn run_method(
    image: &PyImage,
    method: &str,
    density: f64,
    seed: u64,
) -> PyResult<PyReconstruction> {
    let spec = ExperimentSpec::default();
    let out =
        bench::run_method(&image.inner, parse(method)?, density, seed, &spec).map_err(to_py)?;
    Ok(PyReconstruction {
        image: PyImage { inner: out.image },
        iterations: out.iterations,
        converged: out.converged,
        mesh: out.mesh.map(|inner| PyMesh { inner }),
    })
}

/// Runs the experiment described by a TOML file, writes the report and
/// returns its CSV text.
#[pyfunction]
fn run_experiment(config: PathBuf) -> PyResult<String> {
    let spec = ExperimentSpec::load(&config).map_err(to_py)?;
    let report = bench::run_experiment(&spec).map_err(to_py)?;
    bench::write_report(&report, &spec.output_dir).map_err(to_py)?;
    report.to_csv().map_err(to_py)
}

#[pymodule]
#[pyo3(name = "meshcs")]
fn meshcs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyMeasurements>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(ama, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(run_method, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
