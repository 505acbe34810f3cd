//! File formats: spaces and box spaces as JSON, kernels and control
//! envelopes as CSV, fibred coarse embeddings as JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::box_space::{box_space, BoxSpace, FiniteGroup, GroupElement};
use crate::error::{input, Error, Result};
use crate::fibred::FibredEmbedding;
use crate::kernels::{Envelopes, Kernel};
use crate::metric_space::{build_graph_space, CoarseUnion, Dist, MetricSpace};
use crate::scalar::Scalar;

/// A graph on `0..n`, optionally split into contiguous components
/// (`components` lists their sizes in order) with union offsets and local
/// basepoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<Dist>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoints: Option<Vec<usize>>,
}

impl SpaceFile {
    pub fn from_union(u: &CoarseUnion) -> Self {
        let mut edges = Vec::new();
        let mut sizes = Vec::new();
        for (i, c) in u.components().iter().enumerate() {
            let start = u.component_range(i).start;
            edges.extend(c.edge_list().iter().map(|&(a, b)| [start + a, start + b]));
            sizes.push(c.n());
        }
        Self {
            n: sizes.iter().sum(),
            edges,
            components: Some(sizes),
            offsets: Some(u.offsets().to_vec()),
            basepoints: Some(u.basepoints().to_vec()),
        }
    }

    /// Build the coarse union. Without `components`, the connected components
    /// of the graph are used and must occupy contiguous id ranges.
    pub fn build(&self) -> Result<CoarseUnion> {
        for e in &self.edges {
            for &v in e {
                if v >= self.n {
                    return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
                }
            }
        }
        let sizes = match &self.components {
            Some(s) => {
                if s.iter().sum::<usize>() != self.n || s.contains(&0) {
                    return input("component sizes must be positive and sum to n");
                }
                s.clone()
            }
            None => {
                let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
                let whole = build_graph_space(self.n, &pairs)?;
                let mut sizes = Vec::new();
                let mut next = 0;
                for comp in whole.split_components().1 {
                    if comp.first() != Some(&next) || comp.last() != Some(&(next + comp.len() - 1)) {
                        return input("components must occupy contiguous id ranges; list their sizes explicitly");
                    }
                    next += comp.len();
                    sizes.push(comp.len());
                }
                sizes
            }
        };
        let mut starts = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            starts.push(acc);
            acc += s;
        }
        let mut local: Vec<Vec<(usize, usize)>> = vec![Vec::new(); sizes.len()];
        for e in &self.edges {
            let i = starts.partition_point(|&s| s <= e[0]) - 1;
            let j = starts.partition_point(|&s| s <= e[1]) - 1;
            if i != j {
                return input(format!("edge ({}, {}) joins two components", e[0], e[1]));
            }
            local[i].push((e[0] - starts[i], e[1] - starts[i]));
        }
        let spaces: Vec<MetricSpace> = sizes
            .iter()
            .zip(&local)
            .map(|(&s, e)| build_graph_space(s, e))
            .collect::<Result<_>>()?;
        let basepoints = self.basepoints.clone().unwrap_or_else(|| vec![0; spaces.len()]);
        match &self.offsets {
            Some(o) => CoarseUnion::with_offsets(spaces, o.clone(), basepoints),
            None => CoarseUnion::with_basepoints(spaces, basepoints),
        }
    }
}

/// A group family in a box-space description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupSpec {
    Cyclic { n: usize },
    Sl2 { p: u32 },
    Table { mul: Vec<Vec<usize>> },
    Product { factors: Vec<usize> },
}

impl GroupSpec {
    pub fn build(&self) -> Result<FiniteGroup> {
        match self {
            GroupSpec::Cyclic { n } => FiniteGroup::cyclic(*n),
            GroupSpec::Sl2 { p } => FiniteGroup::sl2(*p),
            GroupSpec::Table { mul } => FiniteGroup::table(mul.clone()),
            GroupSpec::Product { factors } => FiniteGroup::product(factors.clone()),
        }
    }
}

/// A generator given either as a JSON element or by its label
/// (`"3"`, `"(1,0)"`, `"[[1,1],[0,1]]"`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementInput {
    Element(GroupElement),
    Label(String),
}

impl ElementInput {
    pub fn resolve(&self) -> Result<GroupElement> {
        match self {
            ElementInput::Element(g) => Ok(g.clone()),
            ElementInput::Label(s) => parse_label(s),
        }
    }
}

/// Parse an element label as printed by [`GroupElement`]'s `Display`.
pub fn parse_label(s: &str) -> Result<GroupElement> {
    let t = s.trim();
    let json = if let Some(inner) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        format!("[{inner}]")
    } else {
        t.to_string()
    };
    serde_json::from_str(&json).map_err(|_| Error::Input(format!("unrecognised element label {s:?}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpaceFile {
    pub quotients: Vec<GroupSpec>,
    /// Generators of the ambient group; empty means the standard ones of the
    /// first quotient.
    #[serde(default)]
    pub generators: Vec<ElementInput>,
}

impl BoxSpaceFile {
    pub fn build(&self) -> Result<BoxSpace> {
        let groups: Vec<FiniteGroup> = self.quotients.iter().map(GroupSpec::build).collect::<Result<_>>()?;
        let gens: Vec<GroupElement> = if self.generators.is_empty() {
            groups.first().map(FiniteGroup::standard_generators).unwrap_or_default()
        } else {
            self.generators.iter().map(ElementInput::resolve).collect::<Result<_>>()?
        };
        box_space(groups, &gens)
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_space(path: impl AsRef<Path>) -> Result<CoarseUnion> {
    read_json::<SpaceFile>(path)?.build()
}

pub fn save_space(path: impl AsRef<Path>, u: &CoarseUnion) -> Result<()> {
    write_json(path, &SpaceFile::from_union(u))
}

pub fn load_box_space(path: impl AsRef<Path>) -> Result<BoxSpace> {
    read_json::<BoxSpaceFile>(path)?.build()
}

pub fn save_fce<T: Scalar + Serialize>(path: impl AsRef<Path>, fce: &FibredEmbedding<T>) -> Result<()> {
    write_json(path, fce)
}

pub fn load_fce<T: Scalar + DeserializeOwned>(path: impl AsRef<Path>) -> Result<FibredEmbedding<T>> {
    read_json(path)
}

/// Rows `x,y,value` with `x <= y`.
pub fn write_kernel_csv<T: Scalar, W: Write>(kernel: &Kernel<T>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "value"])?;
    for &((x, y), v) in kernel.entries() {
        out.write_record([x.to_string(), y.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_kernel_csv<T: Scalar + FromStr, R: Read>(n: usize, r: R) -> Result<Kernel<T>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return input("kernel rows need the columns x,y,value");
        }
        let x: usize = rec[0].trim().parse().map_err(|_| Error::Input(format!("bad x {:?}", &rec[0])))?;
        let y: usize = rec[1].trim().parse().map_err(|_| Error::Input(format!("bad y {:?}", &rec[1])))?;
        let v: T = rec[2].trim().parse().map_err(|_| Error::Input(format!("bad value {:?}", &rec[2])))?;
        rows.push((x, y, v));
    }
    Kernel::from_pairs(n, rows)
}

#[derive(Serialize, Deserialize)]
struct EnvelopeRow {
    r: f64,
    rho_minus: f64,
    rho_plus: f64,
}

/// Rows `r,rho_minus,rho_plus`.
pub fn write_envelopes_csv<W: Write>(env: &Envelopes, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for i in 0..env.r.len() {
        out.serialize(EnvelopeRow {
            r: env.r[i],
            rho_minus: env.rho_minus[i],
            rho_plus: env.rho_plus[i],
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_envelopes_csv<R: Read>(r: R) -> Result<Envelopes> {
    let mut env = Envelopes {
        r: Vec::new(),
        rho_minus: Vec::new(),
        rho_plus: Vec::new(),
    };
    for row in csv::Reader::from_reader(r).deserialize::<EnvelopeRow>() {
        let row = row?;
        env.r.push(row.r);
        env.rho_minus.push(row.rho_minus);
        env.rho_plus.push(row.rho_plus);
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse() {
        assert_eq!(parse_label("3").unwrap(), GroupElement::Int(3));
        assert_eq!(parse_label("(1,-2)").unwrap(), GroupElement::Tuple(vec![1, -2]));
        assert_eq!(
            parse_label("[[1,1],[0,1]]").unwrap(),
            GroupElement::Matrix([[1, 1], [0, 1]])
        );
        assert!(parse_label("x").is_err());
    }

    #[test]
    fn space_json_infers_components() {
        let f: SpaceFile = serde_json::from_str(r#"{"n":5,"edges":[[0,1],[2,3],[3,4],[4,2]]}"#).unwrap();
        let u = f.build().unwrap();
        assert_eq!(u.component_count(), 2);
        let back = SpaceFile::from_union(&u).build().unwrap();
        assert_eq!(back.offsets(), u.offsets());
        let bad: SpaceFile = serde_json::from_str(r#"{"n":3,"edges":[[0,2]]}"#).unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn group_specs_parse() {
        let f: BoxSpaceFile = serde_json::from_str(
            r#"{"quotients":[{"kind":"cyclic","n":4},{"kind":"cyclic","n":8}],"generators":["1"]}"#,
        )
        .unwrap();
        assert_eq!(crate::Metric::len(f.build().unwrap().union()), 12);
        let s: GroupSpec = serde_json::from_str(r#"{"kind":"sl2","p":3}"#).unwrap();
        assert_eq!(s.build().unwrap().order(), 24);
    }

    #[test]
    fn big_offsets_survive_json() {
        let v: Vec<Dist> = vec![0, 10u128.pow(30) + 7];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vec<Dist>>(&s).unwrap(), v);
    }
}
