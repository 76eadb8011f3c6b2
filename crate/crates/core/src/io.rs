//! File formats shared with the CLI: edge lists, sample and fit CSVs,
//! estimate records, and TOML configs.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dgp::{DgpConfig, Sample};
use crate::error::{Error, Result};
use crate::estimators::{ControlSpec, EstimateResult};
use crate::felogit::LinkModelFit;
use crate::mc::McConfig;
use crate::network::AdjacencyNetwork;

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Writes the `i j` (0-based, i < j) edge-list format with an `# n=` header.
pub fn write_edge_list(path: &Path, net: &AdjacencyNetwork) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# n={}", net.n())?;
    for (i, j) in net.edges() {
        writeln!(f, "{i} {j}")?;
    }
    Ok(())
}

/// Reads an edge list; validates ids, the i < j convention, and no
/// self-loops. The node count comes from the header or, absent one, from the
/// largest id seen.
pub fn read_edge_list(path: &Path) -> Result<AdjacencyNetwork> {
    let f = std::fs::File::open(path)?;
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_id = 0usize;
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("n=") {
                n = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| parse_err(path, format!("bad n header: {line}")))?,
                );
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, format!("line {}: expected `i j`", lineno + 1)));
        };
        let i: usize = a
            .parse()
            .map_err(|_| parse_err(path, format!("line {}: bad id {a}", lineno + 1)))?;
        let j: usize = b
            .parse()
            .map_err(|_| parse_err(path, format!("line {}: bad id {b}", lineno + 1)))?;
        if i == j {
            return Err(parse_err(path, format!("line {}: self-loop {i}", lineno + 1)));
        }
        if i >= j {
            return Err(parse_err(
                path,
                format!("line {}: expected i < j, got {i} {j}", lineno + 1),
            ));
        }
        max_id = max_id.max(j);
        edges.push((i, j));
    }
    let n = n.unwrap_or(max_id + 1);
    AdjacencyNetwork::from_edges(n, &edges)
}

/// Sample CSV: `id,y,x1,x2[,a,upsilon]`. Latent columns are written only when
/// present.
pub fn write_sample_csv(path: &Path, sample: &Sample) -> Result<()> {
    if sample.x1.ncols() != 1 {
        return Err(Error::InvalidConfig(
            "sample CSV export supports a single x1 column".into(),
        ));
    }
    let latent = sample.a.is_some() && sample.upsilon.is_some();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    if latent {
        wtr.write_record(["id", "y", "x1", "x2", "a", "upsilon"])
    } else {
        wtr.write_record(["id", "y", "x1", "x2"])
    }
    .map_err(|e| parse_err(path, e.to_string()))?;
    for i in 0..sample.n() {
        let mut row = vec![
            i.to_string(),
            sample.y[i].to_string(),
            sample.x1[(i, 0)].to_string(),
            sample.x2[i].to_string(),
        ];
        if latent {
            row.push(sample.a.as_ref().unwrap()[i].to_string());
            row.push(sample.upsilon.as_ref().unwrap()[i].to_string());
        }
        wtr.write_record(&row)
            .map_err(|e| parse_err(path, e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a sample CSV plus its edge list into a [`Sample`].
pub fn read_sample_csv(path: &Path, edge_path: &Path) -> Result<Sample> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cy), Some(cx1), Some(cx2)) = (col("id"), col("y"), col("x1"), col("x2"))
    else {
        return Err(parse_err(path, "missing one of id,y,x1,x2 columns"));
    };
    let ca = col("a");
    let cu = col("upsilon");
    let mut rows: Vec<(usize, f64, f64, f64, Option<f64>, Option<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .ok_or_else(|| parse_err(path, "short row"))?
                .parse()
                .map_err(|_| parse_err(path, "non-numeric cell"))
        };
        let id: usize = rec
            .get(ci)
            .ok_or_else(|| parse_err(path, "short row"))?
            .parse()
            .map_err(|_| parse_err(path, "bad id"))?;
        rows.push((
            id,
            get(cy)?,
            get(cx1)?,
            get(cx2)?,
            ca.map(get).transpose()?,
            cu.map(get).transpose()?,
        ));
    }
    rows.sort_by_key(|r| r.0);
    let n = rows.len();
    for (expect, row) in rows.iter().enumerate() {
        if row.0 != expect {
            return Err(parse_err(path, format!("ids not contiguous at {expect}")));
        }
    }
    let network = read_edge_list(edge_path)?;
    if network.n() != n {
        return Err(parse_err(
            edge_path,
            format!("edge list has {} nodes, sample has {n}", network.n()),
        ));
    }
    let has_a = rows.iter().all(|r| r.4.is_some());
    let has_u = rows.iter().all(|r| r.5.is_some());
    Ok(Sample {
        network,
        x1: DMatrix::from_fn(n, 1, |i, _| rows[i].2),
        x2: DVector::from_fn(n, |i, _| rows[i].3),
        y: DVector::from_fn(n, |i, _| rows[i].1),
        a: has_a.then(|| DVector::from_fn(n, |i, _| rows[i].4.unwrap())),
        upsilon: has_u.then(|| DVector::from_fn(n, |i, _| rows[i].5.unwrap())),
    })
}

/// Fit CSV (`node,a_hat`, excluded nodes blank) plus a small metadata TOML.
pub fn write_fit(dir: &Path, fit: &LinkModelFit) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("fit.csv");
    let mut wtr = csv::Writer::from_path(&csv_path).map_err(|e| parse_err(&csv_path, e.to_string()))?;
    wtr.write_record(["node", "a_hat"])
        .map_err(|e| parse_err(&csv_path, e.to_string()))?;
    for (i, &a) in fit.a_hat.iter().enumerate() {
        let cell = if a.is_finite() {
            a.to_string()
        } else {
            String::new()
        };
        wtr.write_record([i.to_string(), cell])
            .map_err(|e| parse_err(&csv_path, e.to_string()))?;
    }
    wtr.flush()?;
    let mut f = std::fs::File::create(dir.join("fit_meta.toml"))?;
    writeln!(
        f,
        "lambda_hat = [{}]",
        fit.lambda_hat
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )?;
    writeln!(f, "converged = {}", fit.converged)?;
    writeln!(f, "iterations = {}", fit.iterations)?;
    writeln!(f, "max_grad = {}", fit.max_grad)?;
    writeln!(
        f,
        "excluded = [{}]",
        fit.excluded
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )?;
    Ok(())
}

/// Reads a fit written by [`write_fit`].
pub fn read_fit(dir: &Path) -> Result<LinkModelFit> {
    let csv_path = dir.join("fit.csv");
    let mut rdr = csv::Reader::from_path(&csv_path).map_err(|e| parse_err(&csv_path, e.to_string()))?;
    let mut a_hat = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(&csv_path, e.to_string()))?;
        let cell = rec.get(1).unwrap_or("");
        a_hat.push(if cell.is_empty() {
            f64::NAN
        } else {
            cell.parse()
                .map_err(|_| parse_err(&csv_path, "bad a_hat cell"))?
        });
    }
    let meta_path = dir.join("fit_meta.toml");
    let text = std::fs::read_to_string(&meta_path)?;
    let value: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| parse_err(&meta_path, e.to_string()))?;
    let lambda_hat = value
        .get("lambda_hat")
        .and_then(|v| v.as_array())
        .map(|arr| arr.iter().filter_map(|v| v.as_float()).collect())
        .unwrap_or_default();
    let excluded: Vec<usize> = value
        .get("excluded")
        .and_then(|v| v.as_array())
        .map(|arr| {
            arr.iter()
                .filter_map(|v| v.as_integer())
                .map(|v| v as usize)
                .collect()
        })
        .unwrap_or_default();
    Ok(LinkModelFit {
        lambda_hat,
        a_hat,
        converged: value
            .get("converged")
            .and_then(|v| v.as_bool())
            .unwrap_or(false),
        iterations: value
            .get("iterations")
            .and_then(|v| v.as_integer())
            .unwrap_or(0) as usize,
        max_grad: value
            .get("max_grad")
            .and_then(|v| v.as_float())
            .unwrap_or(f64::NAN),
        excluded,
    })
}

/// One-row CSV record of an estimate.
pub fn write_estimate_csv(
    path: &Path,
    spec: &ControlSpec,
    result: &EstimateResult,
    reject: &[bool],
) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| parse_err(path, e.to_string()))?;
    let mut header = vec!["estimator".to_string(), "k_used".to_string()];
    let flat = result.beta_hat.flat();
    let names = crate::mc::coefficient_names(result.beta_hat.beta2.len());
    for n in &names {
        header.push(n.clone());
    }
    for n in &names {
        header.push(format!("se_{n}"));
    }
    for n in &names {
        header.push(format!("reject_{n}"));
    }
    header.push("n_dropped".into());
    header.push("first_stage_rank".into());
    wtr.write_record(&header)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut row = vec![spec.label(), result.k_used.to_string()];
    row.extend(flat.iter().map(|v| v.to_string()));
    row.extend(result.se.iter().map(|v| v.to_string()));
    row.extend(
        reject
            .iter()
            .map(|&b| if b { "1" } else { "0" }.to_string()),
    );
    row.push(result.n_dropped.to_string());
    row.push(result.first_stage_rank.to_string());
    wtr.write_record(&row)
        .map_err(|e| parse_err(path, e.to_string()))?;
    wtr.flush()?;
    Ok(())
}

/// Strict TOML load: unknown keys are hard errors.
pub fn load_dgp_config(path: &Path) -> Result<DgpConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: DgpConfig =
        toml::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_mc_config(path: &Path) -> Result<McConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: McConfig = toml::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp;

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("peerfx-io-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tmpdir("edges");
        let net = AdjacencyNetwork::from_edges(5, &[(0, 3), (1, 2), (2, 4)]).unwrap();
        let path = dir.join("net.edges");
        write_edge_list(&path, &net).unwrap();
        let back = read_edge_list(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn edge_list_rejects_malformed_lines() {
        let dir = tmpdir("bad-edges");
        let path = dir.join("bad.edges");
        std::fs::write(&path, "# n=4\n2 1\n").unwrap();
        assert!(read_edge_list(&path).is_err(), "i >= j must fail");
        std::fs::write(&path, "# n=4\n1 1\n").unwrap();
        assert!(read_edge_list(&path).is_err(), "self-loop must fail");
        std::fs::write(&path, "# n=4\n0 9\n").unwrap();
        assert!(read_edge_list(&path).is_err(), "out of range must fail");
    }

    #[test]
    fn sample_round_trip() {
        let dir = tmpdir("sample");
        let cfg = dgp::DgpConfig::paper_design(30, 0.2, 6.0, 77);
        let sample = dgp::simulate(&cfg, 0).unwrap();
        let csv_path = dir.join("sample.csv");
        let edge_path = dir.join("sample.edges");
        write_sample_csv(&csv_path, &sample).unwrap();
        write_edge_list(&edge_path, &sample.network).unwrap();
        let back = read_sample_csv(&csv_path, &edge_path).unwrap();
        assert_eq!(back.n(), 30);
        assert!((&back.y - &sample.y).amax() < 1e-12);
        assert!((&back.x2 - &sample.x2).amax() < 1e-12);
        assert!(
            (back.a.as_ref().unwrap() - sample.a.as_ref().unwrap()).amax() < 1e-12
        );
    }

    #[test]
    fn fit_round_trip_preserves_exclusions() {
        let dir = tmpdir("fit");
        let fit = LinkModelFit {
            lambda_hat: vec![0.93],
            a_hat: vec![0.1, f64::NAN, -0.4],
            converged: true,
            iterations: 12,
            max_grad: 3e-9,
            excluded: vec![1],
        };
        write_fit(&dir, &fit).unwrap();
        let back = read_fit(&dir).unwrap();
        assert_eq!(back.lambda_hat, fit.lambda_hat);
        assert!(back.a_hat[1].is_nan());
        assert_eq!(back.excluded, vec![1]);
        assert!(back.converged);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tmpdir("cfg");
        let path = dir.join("bad.toml");
        std::fs::write(
            &path,
            r#"
n = 40
lambda = 1.0
alpha_low = -1.5
alpha_high = 1.0
mu0 = 0.25
mu1 = 0.75
h_form = "sin_kappa"
kappa = 3.0
seed = 1
not_a_real_key = 7

[beta]
beta1 = 0.2
beta2 = [1.0]
beta3 = [1.0]
"#,
        )
        .unwrap();
        assert!(load_dgp_config(&path).is_err());
    }
}
