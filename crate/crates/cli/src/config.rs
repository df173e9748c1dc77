//! Run configuration: command-line flags layered over an optional JSON file
//! layered over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use orbitforge::{BBox, GridSpec, Params, Potential, SolveConfig};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Builtin { name: String, params: Params },
    Expr { text: String, params: Params },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        Ok(match self {
            PotentialSpec::Builtin { name, params } => Potential::builtin(name, params)?,
            PotentialSpec::Expr { text, params } => Potential::from_expr(text, params, Some(2))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaList {
    Auto,
    Values(Vec<f64>),
}

/// Oracle terminal as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalSpec {
    Origin,
    Component(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Chart,
    /// `symmetric` and `source` are exclusive; neither means automatic.
    Solve {
        symmetric: bool,
        source: Option<usize>,
    },
    Sweep(AlphaList),
    Oracle {
        source: TerminalSpec,
        target: TerminalSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Formats {
    pub svg: bool,
    pub json: bool,
    pub csv: bool,
}

impl Formats {
    pub fn any(&self) -> bool {
        self.svg || self.json || self.csv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub alpha: f64,
    pub bbox: BBox,
    pub grid: [usize; 2],
    pub mode: Mode,
    pub solver: SolveConfig,
    pub out: PathBuf,
    pub formats: Formats,
}

impl RunConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec { bbox: self.bbox.clone(), resolution: self.grid }
    }
}

/// JSON config file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub builtin: Option<String>,
    pub expr: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub alpha: Option<f64>,
    pub alphas: Option<AlphasJson>,
    pub bbox: Option<Vec<f64>>,
    pub grid: Option<Vec<usize>>,
    pub solver: Option<SolveConfig>,
    pub symmetric: Option<bool>,
    pub source: Option<String>,
    pub target: Option<String>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
    pub json: Option<bool>,
    pub csv: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlphasJson {
    Word(String),
    List(Vec<f64>),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Flag values shared by every subcommand, already parsed by clap.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub builtin: Option<String>,
    pub expr: Option<String>,
    pub params: Vec<String>,
    pub lambda: Option<f64>,
    pub k: Option<f64>,
    pub alpha: Option<f64>,
    pub bbox: Option<String>,
    pub grid: Option<String>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: bool,
    pub json: bool,
    pub csv: bool,
    pub config: Option<PathBuf>,
}

/// Subcommand-specific inputs before merging.
#[derive(Debug, Clone)]
pub enum ModeFlags {
    Chart,
    Solve { symmetric: bool, source: Option<usize> },
    Sweep { alphas: Option<String> },
    Oracle { source: Option<String>, target: Option<String> },
}

pub fn parse_param(s: &str) -> Result<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("--param expects name=value, got '{s}'"))?;
    let k = k.trim();
    if k.is_empty() {
        bail!("--param expects name=value, got '{s}'");
    }
    let v: f64 = v.trim().parse().map_err(|_| anyhow!("--param {k}: '{}' is not a number", v.trim()))?;
    Ok((k.to_string(), v))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("{what}: '{}' is not a number", p.trim()))).collect()
}

pub fn parse_bbox(s: &str) -> Result<BBox> {
    bbox_from(&parse_list(s, "--bbox")?)
}

fn bbox_from(v: &[f64]) -> Result<BBox> {
    if v.len() != 4 {
        bail!("bbox needs four numbers xmin,xmax,ymin,ymax, got {}", v.len());
    }
    BBox::new(vec![v[0], v[2]], vec![v[1], v[3]]).map_err(|e| anyhow!("bbox: {e}"))
}

pub fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let parts: Vec<&str> = s.split(['x', ',']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| anyhow!("--grid: '{}' is not a positive integer", p.trim())))
        .collect::<Result<_>>()?;
    grid_from(&nums)
}

fn grid_from(v: &[usize]) -> Result<[usize; 2]> {
    let g = match v {
        [n] => [*n, *n],
        [a, b] => [*a, *b],
        _ => bail!("grid needs one or two sizes (e.g. 256 or 256x128)"),
    };
    if g[0] < 4 || g[1] < 4 {
        bail!("grid must have at least 4 cells per axis, got {}x{}", g[0], g[1]);
    }
    Ok(g)
}

fn parse_alphas(s: &str) -> Result<AlphaList> {
    if s.trim().eq_ignore_ascii_case("auto") {
        return Ok(AlphaList::Auto);
    }
    let v = parse_list(s, "--alphas")?;
    if v.is_empty() {
        bail!("--alphas needs at least one value");
    }
    Ok(AlphaList::Values(v))
}

pub fn parse_terminal(s: &str) -> Result<TerminalSpec> {
    if s.trim().eq_ignore_ascii_case("origin") {
        return Ok(TerminalSpec::Origin);
    }
    s.trim().parse::<usize>().map(TerminalSpec::Component).map_err(|_| anyhow!("terminal must be 'origin' or a component id, got '{s}'"))
}

/// Default window for each built-in; expressions get `[−2, 2]²`.
pub fn default_bbox(p: &PotentialSpec) -> BBox {
    match p {
        PotentialSpec::Builtin { name, .. } => match name.as_str() {
            "ex2" => BBox::planar(-1.5, 1.5, -1.0, 1.0),
            "perturbed" => BBox::planar(-1.2, 1.2, -0.6, 0.6),
            _ => BBox::planar(-1.5, 1.5, -1.5, 1.5),
        },
        PotentialSpec::Expr { .. } => BBox::planar(-2.0, 2.0, -2.0, 2.0),
    }
}

/// 256 cells along x, near-square cells.
pub fn default_grid(b: &BBox) -> [usize; 2] {
    let w = b.hi[0] - b.lo[0];
    let h = b.hi[1] - b.lo[1];
    [256, ((256.0 * h / w).round() as usize).clamp(16, 1024)]
}

/// Merges flags over the file over defaults and validates the result.
pub fn resolve(flags: &Flags, mode: &ModeFlags) -> Result<RunConfig> {
    let file = match &flags.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };

    let mut params: Params = file.params.clone();
    for p in &flags.params {
        let (k, v) = parse_param(p)?;
        params.insert(k, v);
    }
    if let Some(l) = flags.lambda {
        params.insert("lambda".into(), l);
    }
    if let Some(k) = flags.k {
        params.insert("k".into(), k);
    }

    let (builtin, expr) = match (&flags.builtin, &flags.expr) {
        (Some(_), Some(_)) => bail!("give either --builtin or --expr, not both"),
        (Some(b), None) => (Some(b.clone()), None),
        (None, Some(e)) => (None, Some(e.clone())),
        (None, None) => (file.builtin.clone(), file.expr.clone()),
    };
    let potential = match (builtin, expr) {
        (Some(_), Some(_)) => bail!("config file sets both builtin and expr"),
        (Some(name), None) => PotentialSpec::Builtin { name, params },
        (None, Some(text)) => PotentialSpec::Expr { text, params },
        (None, None) => bail!("no potential given; use --builtin NAME or --expr TEXT"),
    };
    let alpha = flags.alpha.or(file.alpha).unwrap_or(0.0);
    if !alpha.is_finite() {
        bail!("alpha must be finite");
    }

    let bbox = match (&flags.bbox, &file.bbox) {
        (Some(s), _) => parse_bbox(s)?,
        (None, Some(v)) => bbox_from(v)?,
        (None, None) => default_bbox(&potential),
    };
    let grid = match (&flags.grid, &file.grid) {
        (Some(s), _) => parse_grid(s)?,
        (None, Some(v)) => grid_from(v)?,
        (None, None) => default_grid(&bbox),
    };

    let mut solver = file.solver.clone().unwrap_or_default();
    if let Some(n) = flags.nodes {
        solver.nodes = n;
    }
    if let Some(s) = flags.seed {
        solver.seed = s;
    }
    solver.validate().map_err(|e| anyhow!("solver settings: {e}"))?;

    let mode = match mode {
        ModeFlags::Chart => Mode::Chart,
        ModeFlags::Solve { symmetric, source } => {
            // the file only fills in when no mode flag was given
            let (symmetric, source) = if *symmetric || source.is_some() {
                (*symmetric, *source)
            } else {
                let source = file
                    .source
                    .as_deref()
                    .map(|s| s.trim().parse::<usize>().map_err(|_| anyhow!("config source must be a component id, got '{s}'")))
                    .transpose()?;
                (file.symmetric.unwrap_or(false), source)
            };
            if symmetric && source.is_some() {
                bail!("--symmetric and --source are exclusive");
            }
            Mode::Solve { symmetric, source }
        }
        ModeFlags::Sweep { alphas } => {
            let list = match (alphas, &file.alphas) {
                (Some(s), _) => parse_alphas(s)?,
                (None, Some(AlphasJson::Word(w))) => parse_alphas(w)?,
                (None, Some(AlphasJson::List(v))) if !v.is_empty() => AlphaList::Values(v.clone()),
                (None, Some(AlphasJson::List(_))) => bail!("config alphas list is empty"),
                (None, None) => AlphaList::Auto,
            };
            if let AlphaList::Values(v) = &list {
                if v.iter().any(|a| !a.is_finite()) {
                    bail!("alphas must be finite");
                }
            }
            Mode::Sweep(list)
        }
        ModeFlags::Oracle { source, target } => {
            let source = source.clone().or(file.source.clone()).unwrap_or_else(|| "origin".into());
            let target = target.clone().or(file.target.clone()).ok_or_else(|| anyhow!("oracle needs --target"))?;
            let (source, target) = (parse_terminal(&source)?, parse_terminal(&target)?);
            if source == target {
                bail!("oracle source and target are the same");
            }
            Mode::Oracle { source, target }
        }
    };

    let cli_formats = Formats { svg: flags.svg, json: flags.json, csv: flags.csv };
    let mut formats = if cli_formats.any() {
        cli_formats
    } else {
        Formats { svg: file.svg.unwrap_or(false), json: file.json.unwrap_or(false), csv: file.csv.unwrap_or(false) }
    };
    let out = flags.out.clone().or(file.out.clone());
    // an output directory with no format named means every format
    if out.is_some() && !formats.any() {
        formats = Formats { svg: true, json: true, csv: true };
    }
    let out = out.unwrap_or_else(|| PathBuf::from("."));

    Ok(RunConfig { potential, alpha, bbox, grid, mode, solver, out, formats })
}
