//! Text file formats: `.dmat` matrices, `.net` manifests, dataset
//! directories, key-value reports and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use descrambler_core::dataset::DeerDataset;
use descrambler_core::deer::{dipolar_constant, DeerGridConfig};
use descrambler_core::replica::{FilterKind, FirFilter};
use descrambler_core::{Activation, DenseMatrix, FeedForwardNet, Layer};

use crate::error::{AppError, AppResult};

fn read(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn write(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// `Debug` formatting of `f64` is the shortest string that parses back to
/// the same bits.
pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> AppResult<DenseMatrix> {
    let parse_err = |line: usize, message: String| AppError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(hline + 1, format!("bad dimension `{t}`"))))
        .collect::<AppResult<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(hline + 1, "header must be `<rows> <cols>`".into()));
    };
    let mut data = Vec::with_capacity(rows.saturating_mul(cols).min(1 << 24));
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| parse_err(idx + 1, format!("bad number `{tok}`")))?;
            if !v.is_finite() {
                return Err(parse_err(idx + 1, format!("non-finite value `{tok}`")));
            }
            data.push(v);
        }
    }
    if data.len() != rows * cols {
        return Err(AppError::Structure {
            path: path.to_path_buf(),
            message: format!("header declares {rows}x{cols} but the file holds {} values", data.len()),
        });
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| AppError::Structure { path: path.to_path_buf(), message: e.to_string() })
}

pub fn save_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> AppResult<()> {
    write(path.as_ref(), &format_matrix(m))
}

pub fn load_matrix(path: impl AsRef<Path>) -> AppResult<DenseMatrix> {
    let path = path.as_ref();
    parse_matrix(&read(path)?, path)
}

/// Loads a row or column matrix as a flat vector.
pub fn load_vector(path: impl AsRef<Path>) -> AppResult<Vec<f64>> {
    let path = path.as_ref();
    let m = load_matrix(path)?;
    if m.rows() != 1 && m.cols() != 1 {
        return Err(AppError::Structure { path: path.to_path_buf(), message: format!("expected a vector, got {:?}", m.shape()) });
    }
    Ok(m.into_vec())
}

pub fn save_vector(v: &[f64], path: impl AsRef<Path>) -> AppResult<()> {
    save_matrix(&DenseMatrix::column(v)?, path)
}

fn layer_file(manifest: &Path, index: usize) -> String {
    let stem = manifest.file_stem().and_then(|s| s.to_str()).unwrap_or("net");
    format!("{stem}.layer{index}.dmat")
}

/// Writes the manifest plus one `.dmat` per layer next to it.
pub fn save_network(net: &FeedForwardNet, path: impl AsRef<Path>) -> AppResult<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut manifest = String::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let file = layer_file(path, i + 1);
        save_matrix(&layer.weights, dir.join(&file))?;
        writeln!(manifest, "layer {} weights={} activation={}", i + 1, file, layer.activation).expect("String");
    }
    write(path, &manifest)
}

pub fn load_network(path: impl AsRef<Path>) -> AppResult<FeedForwardNet> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new(""));
    let text = read(path)?;
    let parse_err = |line: usize, message: String| AppError::Parse { path: path.to_path_buf(), line, message };
    let mut layers = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        if toks.next() != Some("layer") {
            return Err(parse_err(idx + 1, "expected `layer <index> weights=<path> activation=<tag>`".into()));
        }
        let index: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(idx + 1, "missing layer index".into()))?;
        if index != layers.len() + 1 {
            return Err(parse_err(idx + 1, format!("layer {index} out of order")));
        }
        let (mut weights, mut activation) = (None, None);
        for tok in toks {
            match tok.split_once('=') {
                Some(("weights", p)) => weights = Some(dir.join(p)),
                Some(("activation", a)) => {
                    activation = Some(
                        a.parse::<Activation>().map_err(|_| parse_err(idx + 1, format!("unsupported activation `{a}`")))?,
                    )
                }
                _ => return Err(parse_err(idx + 1, format!("unexpected field `{tok}`"))),
            }
        }
        let (Some(w), Some(a)) = (weights, activation) else {
            return Err(parse_err(idx + 1, "layer needs weights= and activation=".into()));
        };
        layers.push(Layer::new(load_matrix(w)?, a));
    }
    FeedForwardNet::new(layers).map_err(|e| AppError::Structure { path: path.to_path_buf(), message: e.to_string() })
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str, path: &Path) -> AppResult<Self> {
        let mut r = Report::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| AppError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected `key = value`".into(),
            })?;
            r.add(k.trim(), v.trim());
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> AppResult<()> {
        write(path.as_ref(), &self.render())
    }

    pub fn load(path: impl AsRef<Path>) -> AppResult<Self> {
        let path = path.as_ref();
        Self::parse(&read(path)?, path)
    }
}

pub fn write_csv<S: AsRef<str>>(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<S>]) -> AppResult<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

pub fn dataset_meta(cfg: &DeerGridConfig, n_traces: usize) -> Report {
    let mut r = Report::new();
    r.add("seed", cfg.seed)
        .add("n_traces", n_traces)
        .add("time_points", cfg.time_points)
        .add("t_max_us", format!("{:?}", cfg.t_max))
        .add("dist_points", cfg.dist_points)
        .add("r_min_nm", format!("{:?}", cfg.r_min))
        .add("r_max_nm", format!("{:?}", cfg.r_max))
        .add("noise_sigma_min", format!("{:?}", cfg.noise_sigma_range.0))
        .add("noise_sigma_max", format!("{:?}", cfg.noise_sigma_range.1))
        .add("modulation_depth_min", format!("{:?}", cfg.modulation_depth_range.0))
        .add("modulation_depth_max", format!("{:?}", cfg.modulation_depth_range.1))
        .add("background_rate_min_per_us", format!("{:?}", cfg.background_rate_range.0))
        .add("background_rate_max_per_us", format!("{:?}", cfg.background_rate_range.1))
        .add("n_gaussians_max", cfg.n_gaussians_max)
        .add("dipolar_constant_rad_nm3_per_us", format!("{:?}", dipolar_constant()));
    r
}

pub fn save_dataset(data: &DeerDataset, meta: &Report, dir: impl AsRef<Path>) -> AppResult<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    save_vector(&data.time_grid, dir.join("time.dmat"))?;
    save_vector(&data.dist_grid, dir.join("dist.dmat"))?;
    save_matrix(&data.inputs, dir.join("inputs.dmat"))?;
    save_matrix(&data.targets, dir.join("targets.dmat"))?;
    meta.save(dir.join("meta"))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> AppResult<DeerDataset> {
    let dir = dir.as_ref();
    let meta = Report::load(dir.join("meta"))?;
    let seed = meta
        .get("seed")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| AppError::Structure { path: dir.join("meta"), message: "missing seed".into() })?;
    let data = DeerDataset::new(
        load_vector(dir.join("time.dmat"))?,
        load_vector(dir.join("dist.dmat"))?,
        load_matrix(dir.join("inputs.dmat"))?,
        load_matrix(dir.join("targets.dmat"))?,
        seed,
    )?;
    Ok(data)
}

fn spec_path(taps: &Path) -> PathBuf {
    let mut s = taps.as_os_str().to_owned();
    s.push(".spec");
    PathBuf::from(s)
}

pub fn filter_report(f: &FirFilter) -> Report {
    let mut r = Report::new();
    r.add("kind", f.kind.tag())
        .add("order", f.order())
        .add("passband_edge", format!("{:?}", f.passband_edge))
        .add("stopband_edge", format!("{:?}", f.stopband_edge))
        .add("cutoff", format!("{:?}", f.cutoff()))
        .add("dc_gain", format!("{:?}", f.dc_gain()));
    r
}

/// Taps as a column `.dmat`, design parameters in `<path>.spec`.
pub fn save_filter(f: &FirFilter, path: impl AsRef<Path>) -> AppResult<()> {
    let path = path.as_ref();
    save_vector(&f.taps, path)?;
    filter_report(f).save(spec_path(path))
}

pub fn load_filter(path: impl AsRef<Path>) -> AppResult<FirFilter> {
    let path = path.as_ref();
    let taps = load_vector(path)?;
    let spec_file = spec_path(path);
    let spec = Report::load(&spec_file)?;
    let field = |k: &str| {
        spec.get(k).ok_or_else(|| AppError::Structure { path: spec_file.clone(), message: format!("missing `{k}`") })
    };
    let num = |k: &str| -> AppResult<f64> {
        field(k)?.parse().map_err(|_| AppError::Structure { path: spec_file.clone(), message: format!("bad `{k}`") })
    };
    let kind: FilterKind = field("kind")?.parse()?;
    Ok(FirFilter { taps, kind, passband_edge: num("passband_edge")?, stopband_edge: num("stopband_edge")? })
}
