//! Named configurations and the tuple file format.

use anyhow::{bail, Context};
use charfn_core::kernel::KernelSpec;
use charfn_core::linalg::{c, CMatrix};
use num_complex::Complex64;
use serde::Deserialize;

/// Where the operator tuple comes from.
#[derive(Clone, Debug)]
pub enum TupleSource {
    /// `T_N` of the kernel `k`.
    Model(usize),
    Matrices(Vec<CMatrix>),
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: String,
    pub kernel: KernelSpec,
    pub cnp: KernelSpec,
    pub tuple: TupleSource,
}

fn szego(d: usize) -> KernelSpec {
    KernelSpec::Szego { d, truncation: 32 }
}

fn bergman(m: u32, d: usize) -> KernelSpec {
    KernelSpec::Bergman { m, d, truncation: 32 }
}

fn dirichlet(d: usize) -> KernelSpec {
    KernelSpec::Dirichlet { d, truncation: 32 }
}

fn szego_dirichlet(d: usize) -> KernelSpec {
    KernelSpec::Product { factors: vec![szego(d), dirichlet(d)] }
}

fn preset(name: impl Into<String>, kernel: KernelSpec, cnp: KernelSpec, tuple: TupleSource) -> Preset {
    Preset { name: name.into(), kernel, cnp, tuple }
}

/// `J_n`, the nilpotent Jordan block.
pub fn jordan(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| if i == j + 1 { c(1.0) } else { c(0.0) })
}

/// Presets reachable by name from `charfn build|verify --preset`.
pub fn named() -> Vec<Preset> {
    let mut out = vec![
        preset("jordan", szego(1), szego(1), TupleSource::Matrices(vec![jordan(2)])),
        preset("non-pure", szego(1), szego(1), TupleSource::Matrices(vec![CMatrix::identity(1, 1)])),
    ];
    out.extend(suite_matrix());
    out
}

pub fn find(name: &str) -> anyhow::Result<Preset> {
    named().into_iter().find(|p| p.name == name).with_context(|| {
        let names: Vec<String> = named().into_iter().map(|p| p.name).collect();
        format!("unknown preset {name:?}; known: {}", names.join(", "))
    })
}

/// The verification matrix: `k_m / DA` for `m ≤ 3`, `DA·Dirichlet` through
/// either factor, `d ≤ 2`, model degree `N ≤ 3`.
pub fn suite_matrix() -> Vec<Preset> {
    let mut out = Vec::new();
    for d in 1..=2 {
        for n in 0..=3 {
            for m in 1..=3 {
                out.push(preset(format!("k{m}-da-d{d}-n{n}"), bergman(m, d), szego(d), TupleSource::Model(n)));
            }
            out.push(preset(format!("dadir-da-d{d}-n{n}"), szego_dirichlet(d), szego(d), TupleSource::Model(n)));
            out.push(preset(format!("dadir-dir-d{d}-n{n}"), szego_dirichlet(d), dirichlet(d), TupleSource::Model(n)));
        }
    }
    out
}

/// `{"mats": [op_1, …, op_d]}` with each operator a list of rows of `[re, im]` pairs.
#[derive(Deserialize)]
struct TupleFile {
    mats: Vec<Vec<Vec<[f64; 2]>>>,
}

pub fn parse_tuple(json: &str) -> anyhow::Result<Vec<CMatrix>> {
    let file: TupleFile = serde_json::from_str(json).context("tuple file")?;
    if file.mats.is_empty() {
        bail!("tuple file lists no operators");
    }
    let mut out = Vec::with_capacity(file.mats.len());
    for (i, rows) in file.mats.iter().enumerate() {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            bail!("operator {i} is not square");
        }
        out.push(CMatrix::from_fn(n, n, |r, col| Complex64::new(rows[r][col][0], rows[r][col][1])));
    }
    Ok(out)
}
