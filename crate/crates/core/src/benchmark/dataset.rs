//! On-disk layout of a generated dataset: `train.csv`, `test.csv`,
//! `graph.txt`, `beta_true.csv` and the `meta.txt` sidecar.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{read_blocks, read_coefficients, read_graph, read_key_values, write_blocks, write_coefficients, write_graph, write_key_values};
use crate::problem::{ProblemInstance, SparsityBudget, Support};

use super::{Mode, SynthDataset, SynthParams};

fn metadata(ds: &SynthDataset) -> BTreeMap<String, String> {
    let p = &ds.params;
    [
        ("mode", p.mode.as_str().to_owned()),
        ("n", p.n.to_string()),
        ("t", p.t.to_string()),
        ("d", p.d.to_string()),
        ("k_local", p.k_local.to_string()),
        ("k_global", p.k_global.to_string()),
        ("k_change", p.k_change.to_string()),
        ("sigma_v", p.sigma_v.to_string()),
        ("xi", p.xi.to_string()),
        ("rho_t", p.rho_t.to_string()),
        ("rho_d", p.rho_d.to_string()),
        ("edges", p.edges.to_string()),
        ("seed", p.seed.to_string()),
        ("realized_local", ds.budget.local.to_string()),
        ("realized_global", ds.budget.global.to_string()),
        ("realized_change", ds.budget.change.to_string()),
        ("replacements", ds.replacements.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect()
}

/// Writes `dataset` into `dir`, creating it if needed.
pub fn save_dataset(dataset: &SynthDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_blocks(BufWriter::new(File::create(dir.join("train.csv"))?), dataset.instance.blocks())?;
    write_blocks(BufWriter::new(File::create(dir.join("test.csv"))?), &dataset.test_blocks)?;
    write_graph(BufWriter::new(File::create(dir.join("graph.txt"))?), dataset.instance.graph())?;
    write_coefficients(BufWriter::new(File::create(dir.join("beta_true.csv"))?), dataset.params.d, &dataset.beta_true)?;
    write_key_values(BufWriter::new(File::create(dir.join("meta.txt"))?), &metadata(dataset))
}

fn field<V: FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<V> {
    let raw = meta.get(key).ok_or_else(|| Error::Parse { line: 0, message: format!("metadata lacks `{key}`") })?;
    raw.parse().map_err(|_| Error::Parse { line: 0, message: format!("bad value `{raw}` for `{key}`") })
}

/// Reads a dataset written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<SynthDataset> {
    let meta = read_key_values(BufReader::new(File::open(dir.join("meta.txt"))?))?;
    let params = SynthParams {
        mode: field::<Mode>(&meta, "mode")?,
        n: field(&meta, "n")?,
        t: field(&meta, "t")?,
        d: field(&meta, "d")?,
        k_local: field(&meta, "k_local")?,
        k_global: field(&meta, "k_global")?,
        k_change: field(&meta, "k_change")?,
        sigma_v: field(&meta, "sigma_v")?,
        xi: field(&meta, "xi")?,
        rho_t: field(&meta, "rho_t")?,
        rho_d: field(&meta, "rho_d")?,
        edges: field(&meta, "edges")?,
        seed: field(&meta, "seed")?,
    };
    let budget = SparsityBudget::new(field(&meta, "realized_local")?, field(&meta, "realized_global")?, field(&meta, "realized_change")?);
    let graph = read_graph(BufReader::new(File::open(dir.join("graph.txt"))?), params.t)?;
    let train = read_blocks(File::open(dir.join("train.csv"))?, Some(params.t))?;
    let test_blocks = read_blocks(File::open(dir.join("test.csv"))?, Some(params.t))?;
    let (dim, beta_true) = read_coefficients(File::open(dir.join("beta_true.csv"))?)?;
    if dim != params.d || beta_true.len() != params.t * params.d {
        return Err(Error::Dimension("beta_true.csv does not match the metadata".into()));
    }
    let n = params.n as f64;
    let instance = ProblemInstance::new(graph, train, n, n)?;
    Ok(SynthDataset {
        z_true: Support::of_coefficients(params.t, params.d, &beta_true)?,
        replacements: field(&meta, "replacements")?,
        params,
        instance,
        test_blocks,
        beta_true,
        budget,
    })
}
