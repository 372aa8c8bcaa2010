//! D-set selection: the operator that restricts what the recurrent
//! channel sees. Three variants: a hand-specified index mask, a trainable
//! linear bottleneck, and per-step multi-head attention over position
//! vectors.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{init_params, AttentionHead, InitScheme};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Named segments of a flat observation vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSchema {
    segments: Vec<Segment>,
    total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub length: usize,
}

impl ObservationSchema {
    /// Build from (name, length) pairs laid out contiguously.
    pub fn new(segments: &[(&str, usize)]) -> Self {
        let mut out = Vec::new();
        let mut offset = 0;
        for (name, length) in segments {
            out.push(Segment { name: name.to_string(), offset, length: *length });
            offset += length;
        }
        ObservationSchema { segments: out, total: offset }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// All indices of one named segment.
    pub fn segment_indices(&self, name: &str) -> Result<Vec<usize>> {
        let seg = self
            .segment(name)
            .ok_or_else(|| Error::config(format!("unknown observation segment {name:?}")))?;
        Ok((seg.offset..seg.offset + seg.length).collect())
    }
}

/// Where position vectors for dynamic attention come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    PerVariable,
    PerSegment,
}

/// Split an observation into position vectors. Per-variable yields N
/// length-1 vectors; per-segment yields one vector per schema segment.
/// Concatenating the result in order reproduces the observation.
pub fn positions_from_schema(
    obs: &[f64],
    schema: &ObservationSchema,
    granularity: Granularity,
) -> Vec<Vec<f64>> {
    match granularity {
        Granularity::PerVariable => obs.iter().map(|v| vec![*v]).collect(),
        Granularity::PerSegment => schema
            .segments()
            .iter()
            .map(|s| obs[s.offset..s.offset + s.length].to_vec())
            .collect(),
    }
}

/// Validated index mask over observation variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualMask {
    indices: Vec<usize>,
}

impl ManualMask {
    pub fn new(indices: Vec<usize>, obs_dim: usize) -> Result<Self> {
        let mut seen = vec![false; obs_dim];
        for &i in &indices {
            if i >= obs_dim {
                return Err(Error::config(format!(
                    "mask index {i} out of range for {obs_dim}-dim observation"
                )));
            }
            if seen[i] {
                return Err(Error::config(format!("mask index {i} repeated")));
            }
            seen[i] = true;
        }
        Ok(ManualMask { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// The d-set selection operator.
#[derive(Debug, Clone)]
pub enum DSetSelector {
    /// Fixed gather of observation variables.
    Manual(ManualMask),
    /// Trainable K×N linear map applied to the observation.
    StaticLinear { a: ParamId, k: usize, n: usize },
    /// K attention heads over per-variable positions, each position
    /// being the variable value with a learned embedding row appended.
    DynamicAttention {
        heads: Vec<AttentionHead>,
        embed: ParamId,
        embed_dim: usize,
        n: usize,
        state_dim: usize,
    },
}

impl DSetSelector {
    pub fn manual(mask: ManualMask) -> Self {
        DSetSelector::Manual(mask)
    }

    pub fn static_linear(
        params: &mut ParamSet,
        name: &str,
        k: usize,
        n: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let a = params.register(
            format!("{name}.a"),
            init_params(&[k, n], InitScheme::XavierUniform, rng)?,
        );
        Ok(DSetSelector::StaticLinear { a, k, n })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn dynamic_attention(
        params: &mut ParamSet,
        name: &str,
        num_heads: usize,
        n: usize,
        state_dim: usize,
        embed_dim: usize,
        scorer_hidden: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_heads == 0 {
            return Err(Error::config("dynamic attention needs at least one head"));
        }
        let embed = params.register(
            format!("{name}.embed"),
            init_params(&[n, embed_dim], InitScheme::XavierUniform, rng)?,
        );
        let heads = (0..num_heads)
            .map(|h| {
                AttentionHead::new(
                    params,
                    &format!("{name}.head{h}"),
                    1 + embed_dim,
                    state_dim,
                    scorer_hidden,
                    rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DSetSelector::DynamicAttention { heads, embed, embed_dim, n, state_dim })
    }

    /// Output width fed into the recurrent cell.
    pub fn output_dim(&self) -> usize {
        match self {
            DSetSelector::Manual(mask) => mask.len(),
            DSetSelector::StaticLinear { k, .. } => *k,
            DSetSelector::DynamicAttention { heads, embed_dim, .. } => {
                heads.len() * (1 + embed_dim)
            }
        }
    }

    /// Apply the selector on the graph. `d_prev` is the current recurrent
    /// state; only dynamic attention reads it.
    pub fn select(&self, g: &mut Graph, obs: NodeId, d_prev: NodeId) -> Result<NodeId> {
        match self {
            DSetSelector::Manual(mask) => select_manual(g, obs, mask),
            DSetSelector::StaticLinear { a, n, .. } => {
                let len = g.value(obs).vector_len()?;
                if len != *n {
                    return Err(Error::shape(format!(
                        "static selector expects {n}-dim observation, got {len}"
                    )));
                }
                let an = g.param(*a);
                g.matvec(an, obs)
            }
            DSetSelector::DynamicAttention { heads, embed, embed_dim, n, .. } => {
                let len = g.value(obs).vector_len()?;
                if len != *n {
                    return Err(Error::shape(format!(
                        "dynamic selector expects {n}-dim observation, got {len}"
                    )));
                }
                let embed_node = g.param(*embed);
                let mut positions = Vec::with_capacity(*n);
                for i in 0..*n {
                    let v = g.index(obs, i)?;
                    let e = g.row(embed_node, i)?;
                    let _ = embed_dim;
                    positions.push(g.concat(&[v, e])?);
                }
                select_dynamic(g, &positions, d_prev, heads)
            }
        }
    }
}

/// Gathered sub-vector in mask order.
pub fn select_manual(g: &mut Graph, obs: NodeId, mask: &ManualMask) -> Result<NodeId> {
    let n = g.value(obs).vector_len()?;
    if let Some(i) = mask.indices().iter().find(|i| **i >= n) {
        return Err(Error::config(format!(
            "mask index {i} out of range for {n}-dim observation"
        )));
    }
    g.gather(obs, mask.indices())
}

/// Trainable linear bottleneck: the K×N matrix times the observation.
pub fn select_static(g: &mut Graph, obs: NodeId, a: NodeId) -> Result<NodeId> {
    g.matvec(a, obs)
}

/// Multi-head soft attention: per head, a softmax-weighted sum of the
/// position vectors; the output concatenates the per-head contexts.
pub fn select_dynamic(
    g: &mut Graph,
    positions: &[NodeId],
    d_prev: NodeId,
    heads: &[AttentionHead],
) -> Result<NodeId> {
    if heads.is_empty() {
        return Err(Error::config("dynamic selection needs at least one head"));
    }
    if positions.is_empty() {
        return Err(Error::shape("dynamic selection over zero positions"));
    }
    let mut contexts = Vec::with_capacity(heads.len());
    for head in heads {
        let alpha = head.scores(g, positions, d_prev)?;
        let mut ctx: Option<NodeId> = None;
        for (i, &p) in positions.iter().enumerate() {
            let w = g.index(alpha, i)?;
            let term = g.smul(w, p)?;
            ctx = Some(match ctx {
                None => term,
                Some(acc) => g.add(acc, term)?,
            });
        }
        contexts.push(ctx.expect("positions nonempty"));
    }
    g.concat(&contexts)
}

/// Write a selector's learned matrix as CSV (one row per output
/// dimension) for inspection. Manual and dynamic selectors have no single
/// static matrix and are rejected.
pub fn export_static_matrix_csv(
    params: &ParamSet,
    selector: &DSetSelector,
    path: &std::path::Path,
) -> Result<()> {
    let DSetSelector::StaticLinear { a, k, n } = selector else {
        return Err(Error::contract(
            "only the static linear selector has an exportable matrix",
        ));
    };
    let data = params.get(*a).data();
    let mut out = String::new();
    for i in 0..*k {
        let row: Vec<String> = (0..*n).map(|j| format!("{}", data[i * n + j])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
