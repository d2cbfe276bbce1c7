//! Scenario files: the shared `key = value` schema, resolved into a kernel,
//! a measure and an engine configuration.

use regdist::config::Config;
use regdist::engine::{Method, SummationConfig};
use regdist::kernels::{parse_mode, read_table, Profile, SphereFn};
use regdist::measures::{generate, DiscreteMeasure, GraphProfile, SetGenerator};
use regdist::synthesis::load_synthesis;
use regdist::{Error, Kernel, Result};
use std::path::{Path, PathBuf};

pub struct Scenario {
    pub name: String,
    pub config: Config,
    /// Directory relative paths in the config are resolved against.
    pub base: PathBuf,
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
    pub diagnostics: Vec<String>,
}

impl Scenario {
    pub fn new(config: Config, base: PathBuf) -> Result<Self> {
        let n = config.usize_or("n", 2)?;
        let alpha = config.f64_or("alpha", 1.0)?;
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        let diagnostics = config
            .get("diagnostics")
            .unwrap_or("")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        Ok(Scenario {
            name: config.get("name").unwrap_or("scenario").to_string(),
            n,
            alpha,
            seed: config.i64_or("seed", 0)? as u64,
            diagnostics,
            config,
            base,
        })
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Files whose contents feed the manifest hash.
    pub fn referenced_files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let spec = match self.config.get("kernel") {
            Some(s) => Some(s.to_string()),
            None => structured_kernel_spec(&self.config.section("kernel")).ok(),
        };
        if let Some(spec) = spec {
            if let Some((kind, arg)) = spec.split_once(':') {
                let is_file = matches!(kind, "table" | "synth") || (kind == "radial" && looks_like_path(arg));
                if is_file {
                    out.push(self.resolve(arg));
                    if kind == "synth" {
                        out.push(self.resolve(arg).with_extension("table"));
                    }
                }
            }
        }
        for key in ["measure.path", "measure.table"] {
            if let Some(p) = self.config.get(key) {
                out.push(self.resolve(p));
            }
        }
        out
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let spec = match self.config.get("kernel") {
            Some(s) => s.to_string(),
            None => structured_kernel_spec(&self.config.section("kernel"))?,
        };
        parse_kernel(&spec, self.n, &|p| self.resolve(p))
    }

    pub fn measure(&self) -> Result<DiscreteMeasure> {
        let m = self.config.section("measure");
        let kind = m.require("type").map_err(|_| Error::Config("missing key 'measure.type'".into()))?;
        let spec = match kind {
            "plane" => SetGenerator::Plane {
                n: self.n,
                d: m.usize_or("d", 1)?,
                half_extent: m.f64_or("half_extent", 100.0)?,
                spacing: m.f64_or("spacing", 0.01)?,
            },
            "sphere" | "circle" => SetGenerator::Sphere {
                n: self.n,
                radius: m.f64_or("radius", 1.0)?,
                nodes: m.usize_or("nodes", 4096)?,
            },
            "graph" => {
                let profile = match m.get("table") {
                    Some(p) => read_graph_table(&self.resolve(p))?,
                    None => GraphProfile::Sine {
                        amplitude: m.f64_or("amplitude", 0.3)?,
                        omega: m.f64_or("omega", 1.0)?,
                    },
                };
                SetGenerator::LipschitzGraph {
                    profile,
                    lipschitz_bound: m.f64("lipschitz_bound")?,
                    half_extent: m.f64_or("half_extent", 100.0)?,
                    spacing: m.f64_or("spacing", 0.01)?,
                }
            }
            "cantor" => SetGenerator::FourCornerCantor {
                generation: m.usize_or("generation", 6)? as u32,
            },
            "cloud" => SetGenerator::CustomPointCloud {
                path: self.resolve(m.require("path")?),
                d: m.f64_or("d", 1.0)?,
            },
            other => return Err(Error::Config(format!("unknown measure.type '{other}'"))),
        };
        generate(&spec)
    }

    pub fn summation(&self) -> Result<SummationConfig> {
        let e = self.config.section("engine");
        let mut cfg = match e.get("method").unwrap_or("brute") {
            "brute" => SummationConfig::brute(),
            "tree" => SummationConfig::tree(e.f64_or("theta", 0.5)?, e.usize_or("order", 4)?),
            other => return Err(Error::Config(format!("unknown engine.method '{other}'"))),
        };
        cfg = cfg.with_tail(e.bool_or("tail", false)?);
        if matches!(cfg.method, Method::Tree { .. }) {
            cfg = cfg.with_target(e.f64_or("target", 1e-6)?);
        }
        Ok(cfg)
    }
}

/// `kernel.type = constant|radial|sphere` with `kernel.constant`,
/// `kernel.radial.table` or `kernel.sphere.series`, as a one-line spec.
fn structured_kernel_spec(k: &Config) -> Result<String> {
    let Some(kind) = k.get("type") else {
        return Ok("const:1".into());
    };
    Ok(match kind {
        "constant" => format!("const:{}", k.get("constant").unwrap_or("1")),
        "radial" => {
            let t = k.require("radial.table")?;
            // Keep bare file names from parsing as expressions.
            if looks_like_path(t) {
                format!("radial:{t}")
            } else {
                format!("radial:./{t}")
            }
        }
        "sphere" => format!("fourier:{}", k.require("sphere.series")?),
        other => return Err(Error::Config(format!("unknown kernel.type '{other}'"))),
    })
}

fn looks_like_path(s: &str) -> bool {
    s.contains('/') || [".txt", ".tab", ".table", ".dat", ".csv"].iter().any(|e| s.ends_with(e))
}

/// `const:C`, `radial:EXPR` or `radial:FILE`, `table:FILE`,
/// `fourier:a0,a1,...` (cosine coefficients, n = 2), `mode:NAME` and
/// `synth:FILE.meta`.
pub fn parse_kernel(spec: &str, n: usize, resolve: &dyn Fn(&str) -> PathBuf) -> Result<Kernel> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("kernel spec '{spec}' must look like kind:argument")))?;
    let arg = arg.trim();
    match kind.trim() {
        "const" => {
            let c: f64 = arg.parse().map_err(|_| Error::Config(format!("kernel constant '{arg}' is not a number")))?;
            Ok(Kernel::constant(n, c))
        }
        "radial" if looks_like_path(arg) => {
            let k = read_table(&resolve(arg), n)?;
            if !k.is_radial() {
                return Err(Error::Config(format!("{arg}: radial kernel table has angular modes")));
            }
            Ok(k)
        }
        "radial" => Ok(Kernel::radial(n, Profile::parse(arg)?)),
        "table" => read_table(&resolve(arg), n),
        "fourier" => {
            let cos = arg
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("fourier coefficients '{arg}' are not numbers")))?;
            Ok(Kernel::zero_homogeneous(n, SphereFn::cosine(cos)))
        }
        "mode" => Ok(Kernel::zero_homogeneous(n, parse_mode(arg)?)),
        "synth" => {
            let (basis, c) = load_synthesis(&resolve(arg))?;
            Ok(basis.assemble(&c))
        }
        other => Err(Error::Config(format!("unknown kernel kind '{other}'"))),
    }
}

fn read_graph_table(path: &Path) -> Result<GraphProfile> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read graph table {}: {e}", path.display())))?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for line in text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()) {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("{}: non-numeric row '{line}'", path.display())))?;
        if v.len() != 2 {
            return Err(Error::Config(format!("{}: expected 'x y' rows", path.display())));
        }
        x.push(v[0]);
        y.push(v[1]);
    }
    Ok(GraphProfile::Table { x, y })
}

/// `"x, y; x, y"` into points of dimension `n`.
pub fn parse_points(s: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| {
            let v = p
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("point '{p}' is not numeric")))?;
            if v.len() != n {
                return Err(Error::Config(format!("point '{p}' has {} coordinates, expected {n}", v.len())));
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_specs() {
        let r = |p: &str| PathBuf::from(p);
        assert_eq!(parse_kernel("const:2.5", 2, &r).unwrap().constant_value(), Some(2.5));
        let k = parse_kernel("radial:1 + exp(-log(t)^2)", 2, &r).unwrap();
        assert!((k.value(&[1.0, 0.0]) - 2.0).abs() < 1e-15);
        let f = parse_kernel("fourier:1,0,0.5", 2, &r).unwrap();
        assert!((f.value(&[0.0, 3.0]) - 0.5).abs() < 1e-15);
        assert!(matches!(parse_kernel("radial:nope/missing.txt", 2, &r), Err(Error::Config(m)) if m.contains("nope/missing.txt")));
        assert!(parse_kernel("bogus", 2, &r).is_err());
    }

    #[test]
    fn structured_kernel_keys() {
        let cfg = Config::parse("kernel.type = sphere\nkernel.sphere.series = 1, 0, 0.5\n").unwrap();
        assert_eq!(structured_kernel_spec(&cfg.section("kernel")).unwrap(), "fourier:1, 0, 0.5");
        let cfg = Config::parse("kernel.type = radial\n").unwrap();
        assert!(structured_kernel_spec(&cfg.section("kernel")).is_err());
        assert_eq!(structured_kernel_spec(&Config::new()).unwrap(), "const:1");
    }

    #[test]
    fn points() {
        assert_eq!(parse_points("0, 1; 2,3", 2).unwrap(), vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert!(parse_points("1,2,3", 2).is_err());
    }
}
