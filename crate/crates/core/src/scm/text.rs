//! SCM description files.
//!
//! ```text
//! [node]
//! name = O
//! domain = 0, 1
//!
//! [noise]
//! name = U_O
//! support = 0, 1
//! probs = 0.5, 0.5
//!
//! [mechanism]
//! node = O
//! parents = A
//! noise = U_O
//! parents=(a1) noise=0 -> 0
//! parents=(a1) noise=1 -> 1
//! parents=(a2) noise=0 -> 1
//! parents=(a2) noise=1 -> 0
//!
//! [expect]                      # optional, checked by `cfrl verify`
//! intervention = A=a1           # comma-separated atomic interventions, may be empty
//! query = O
//! values=(1) -> 0.5             # exact probability of a query tuple
//! ```
//!
//! Mechanism tables must list every (parents, noise) combination exactly once.
//! Unknown sections and keys are rejected with their line number.

use std::collections::BTreeMap;

use super::{Intervention, Mechanism, Node, NoiseSpec, Scm};
use crate::error::{Error, Result};
use crate::kv::{self, Section};

/// Reference probabilities attached to an SCM file.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub line: usize,
    pub intervention: Vec<(String, String)>,
    pub query: Vec<String>,
    pub probs: Vec<(Vec<String>, f64)>,
}

#[derive(Debug, Clone)]
pub struct ScmFile {
    pub scm: Scm,
    pub expectations: Vec<Expectation>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_scm(text: &str) -> Result<ScmFile> {
    let sections = kv::parse(text)?;
    let mut nodes = Vec::new();
    let mut noises = Vec::new();
    let mut raw_mechs: Vec<&Section> = Vec::new();
    let mut expectations = Vec::new();
    for s in &sections {
        match s.name.as_str() {
            "node" => {
                s.check_keys(&["name", "domain"])?;
                if !s.rows.is_empty() {
                    return Err(perr(s.rows[0].line, "table rows are only allowed in [mechanism] and [expect]"));
                }
                nodes.push(Node::new(s.require("name")?.value.clone(), kv::list(&s.require("domain")?.value)));
            }
            "noise" => {
                s.check_keys(&["name", "support", "probs"])?;
                let probs = s.require("probs")?;
                let spec = NoiseSpec::new(
                    s.require("name")?.value.clone(),
                    kv::list(&s.require("support")?.value),
                    kv::parse_f64_list(&probs.value, probs.line)?,
                )
                .map_err(|e| perr(s.line, e.to_string()))?;
                noises.push(spec);
            }
            "mechanism" => {
                s.check_keys(&["node", "parents", "noise"])?;
                raw_mechs.push(s);
            }
            "expect" => {
                s.check_keys(&["intervention", "query"])?;
                let intervention = match s.get("intervention") {
                    Some(e) => kv::list(&e.value)
                        .into_iter()
                        .map(|item| {
                            item.split_once('=')
                                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                                .ok_or_else(|| perr(e.line, format!("expected `node=value`, got `{item}`")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                    None => vec![],
                };
                let query = kv::list(&s.require("query")?.value);
                let mut probs = Vec::new();
                for r in &s.rows {
                    let fields = kv::row_fields(&r.lhs, r.line)?;
                    let values = match fields.as_slice() {
                        [(k, v)] if k == "values" => kv::list(v),
                        _ => return Err(perr(r.line, "expected `values=(...) -> p`")),
                    };
                    if values.len() != query.len() {
                        return Err(perr(r.line, "tuple length differs from the query"));
                    }
                    let p: f64 = r.rhs.parse().map_err(|_| perr(r.line, format!("`{}` is not a number", r.rhs)))?;
                    probs.push((values, p));
                }
                expectations.push(Expectation { line: s.line, intervention, query, probs });
            }
            other => return Err(perr(s.line, format!("unknown section [{other}]"))),
        }
    }

    let domains: BTreeMap<&str, &Vec<String>> = nodes.iter().map(|n| (n.id.as_str(), &n.domain)).collect();
    let supports: BTreeMap<&str, &Vec<String>> = noises.iter().map(|u| (u.id.as_str(), &u.support)).collect();
    let mut mechs = Vec::new();
    for s in raw_mechs {
        let node = s.require("node")?;
        let noise = s.require("noise")?;
        let parents = s.get("parents").map(|e| kv::list(&e.value)).unwrap_or_default();
        let own = domains.get(node.value.as_str()).ok_or_else(|| perr(node.line, format!("unknown node `{}`", node.value)))?;
        let support =
            supports.get(noise.value.as_str()).ok_or_else(|| perr(noise.line, format!("unknown noise `{}`", noise.value)))?;
        let mut parent_domains = Vec::new();
        for p in &parents {
            parent_domains.push(*domains.get(p.as_str()).ok_or_else(|| perr(s.line, format!("unknown parent `{p}`")))?);
        }
        let sizes: Vec<usize> = parent_domains.iter().map(|d| d.len()).collect();
        let rows: usize = sizes.iter().product::<usize>() * support.len();
        let mut table: Vec<Option<usize>> = vec![None; rows];
        for r in &s.rows {
            let fields = kv::row_fields(&r.lhs, r.line)?;
            let mut pvals: Option<Vec<String>> = None;
            let mut uval: Option<String> = None;
            for (k, v) in fields {
                match k.as_str() {
                    "parents" => pvals = Some(kv::list(&v)),
                    "noise" => uval = Some(v),
                    other => return Err(perr(r.line, format!("unknown row field `{other}`"))),
                }
            }
            let pvals = pvals.unwrap_or_default();
            let uval = uval.ok_or_else(|| perr(r.line, "row is missing `noise=`"))?;
            if pvals.len() != parents.len() {
                return Err(perr(r.line, format!("expected {} parent values", parents.len())));
            }
            let mut idx = 0usize;
            for ((v, dom), size) in pvals.iter().zip(&parent_domains).zip(&sizes) {
                let k = dom.iter().position(|d| d == v).ok_or_else(|| perr(r.line, format!("`{v}` is not a parent value")))?;
                idx = idx * size + k;
            }
            let ui = support
                .iter()
                .position(|d| *d == uval)
                .ok_or_else(|| perr(r.line, format!("`{uval}` is not in the noise support")))?;
            idx = idx * support.len() + ui;
            let out = own
                .iter()
                .position(|d| *d == r.rhs)
                .ok_or_else(|| perr(r.line, format!("`{}` is not in the domain of `{}`", r.rhs, node.value)))?;
            if table[idx].replace(out).is_some() {
                return Err(perr(r.line, "duplicate table row"));
            }
        }
        let table: Vec<usize> = table
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| perr(s.line, format!("mechanism for `{}` is not total ({rows} rows required)", node.value)))?;
        mechs.push(Mechanism::new(node.value.clone(), parents, noise.value.clone(), table));
    }
    let scm = Scm::new(nodes, noises, mechs)?;
    Ok(ScmFile { scm, expectations })
}

impl Expectation {
    pub fn intervention(&self, scm: &Scm) -> Result<Intervention> {
        let mut i = Intervention::new();
        for (node, value) in &self.intervention {
            for (k, m) in Intervention::atomic(scm, node, value)?.replacements {
                i.replacements.insert(k, m);
            }
        }
        Ok(i)
    }
}

pub fn to_text(scm: &Scm) -> String {
    let mut out = String::new();
    for n in scm.nodes() {
        out.push_str(&format!("[node]\nname = {}\ndomain = {}\n\n", n.id, n.domain.join(", ")));
    }
    for u in scm.noises() {
        let probs: Vec<String> = u.probs.iter().map(|p| format!("{p}")).collect();
        out.push_str(&format!("[noise]\nname = {}\nsupport = {}\nprobs = {}\n\n", u.id, u.support.join(", "), probs.join(", ")));
    }
    for m in scm.mechanisms() {
        out.push_str(&format!("[mechanism]\nnode = {}\nparents = {}\nnoise = {}\n", m.node, m.parents.join(", "), m.noise));
        let pdoms: Vec<&Vec<String>> =
            m.parents.iter().map(|p| &scm.nodes()[scm.node_index(p).expect("parent exists")].domain).collect();
        let sizes: Vec<usize> = pdoms.iter().map(|d| d.len()).collect();
        let support = &scm.noise_spec(&m.noise).expect("noise exists").support;
        let own = &scm.nodes()[scm.node_index(&m.node).expect("node exists")].domain;
        let mut pa = vec![0usize; sizes.len()];
        let mut k = 0;
        for _ in 0..sizes.iter().product::<usize>() {
            let pv: Vec<&str> = pa.iter().zip(&pdoms).map(|(i, d)| d[*i].as_str()).collect();
            for u in support {
                out.push_str(&format!("parents=({}) noise={} -> {}\n", pv.join(", "), u, own[m.table[k]]));
                k += 1;
            }
            super::increment(&mut pa, &sizes);
        }
        out.push('\n');
    }
    out
}
