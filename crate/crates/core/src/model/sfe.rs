//! Graph-based feature enhancement over non-overlapping patch nodes.

use autograd::Var;
use rand_chacha::ChaCha8Rng;

use super::params::{kaiming, Bound, ParamStore};
use super::LEAKY_SLOPE;
use crate::error::{Error, Result};

/// k nearest neighbors of each of `n` nodes (rows of length `d`), by Euclidean
/// distance, excluding the node itself. Equal distances go to the lower index.
pub fn knn_graph(nodes: &[f64], n: usize, d: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if nodes.len() != n * d {
        return Err(Error::ShapeMismatch(format!("{n} nodes of width {d} need {} values", n * d)));
    }
    if n < k + 1 {
        return Err(Error::TooFewNodes { nodes: n, needed: k + 1 });
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        let a = &nodes[i * d..(i + 1) * d];
        for j in i + 1..n {
            let b = &nodes[j * d..(j + 1) * d];
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            dist[i * n + j] = s;
            dist[j * n + i] = s;
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect())
}

pub(crate) fn node_dim(channels: usize, patch: usize) -> usize {
    channels * patch * patch
}

pub(crate) fn hidden_dim(channels: usize, patch: usize) -> usize {
    (node_dim(channels, patch) / 2).max(1)
}

pub(crate) fn init(store: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str, channels: usize, patch: usize) {
    let d = node_dim(channels, patch);
    let hd = hidden_dim(channels, patch);
    store.insert(format!("{prefix}.graph.weight"), kaiming(rng, &[2 * d, d], 2 * d, LEAKY_SLOPE));
    store.insert(format!("{prefix}.graph.bias"), autograd::Tensor::zeros(&[d]));
    store.insert(format!("{prefix}.mlp.fc1.weight"), kaiming(rng, &[d, hd], d, LEAKY_SLOPE));
    store.insert(format!("{prefix}.mlp.fc1.bias"), autograd::Tensor::zeros(&[hd]));
    store.insert(format!("{prefix}.mlp.fc2.weight"), kaiming(rng, &[hd, d], hd, 1.0));
    store.insert(format!("{prefix}.mlp.fc2.bias"), autograd::Tensor::zeros(&[d]));
}

/// Multiply-accumulates of one application on an `h×w` map.
pub(crate) fn macs(channels: usize, patch: usize, h: usize, w: usize) -> u64 {
    let nodes = (h / patch) * (w / patch);
    let (d, hd) = (node_dim(channels, patch), hidden_dim(channels, patch));
    (nodes * (2 * d * d + d * hd + hd * d)) as u64
}

fn linear(x: &Var, p: &Bound, name: &str) -> Result<Var> {
    Ok(x.matmul(p.get(&format!("{name}.weight"))?)?.add(p.get(&format!("{name}.bias"))?)?)
}

/// Patch nodes → kNN graph → max-relative aggregation and a two-layer MLP, both
/// residual. Output shape equals input shape.
pub(crate) fn forward(p: &Bound, prefix: &str, f: &Var, patch: usize, knn: usize) -> Result<Var> {
    let (b, c, h, w) = f.value().dims4()?;
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::ShapeNotDivisible { height: h, width: w, divisor: patch });
    }
    let (hp, wp) = (h / patch, w / patch);
    let n = hp * wp;
    let d = node_dim(c, patch);
    let x = f
        .reshape(&[b, c, hp, patch, wp, patch])?
        .permute(&[0, 2, 4, 1, 3, 5])?
        .reshape(&[b * n, d])?;

    let mut idx = Vec::with_capacity(b * n * knn);
    for s in 0..b {
        let graph = knn_graph(&x.value().data()[s * n * d..(s + 1) * n * d], n, d, knn)?;
        idx.extend(graph.into_iter().flatten().map(|j| s * n + j));
    }
    let neighbors = x.index_select(0, &idx)?.reshape(&[b * n, knn, d])?;
    let relative = neighbors.sub(&x.reshape(&[b * n, 1, d])?)?.max_axis(1, false)?;
    let agg = Var::concat(&[x.clone(), relative], 1)?;
    let y = linear(&agg, p, &format!("{prefix}.graph"))?.leaky_relu(LEAKY_SLOPE).add(&x)?;
    let hidden = linear(&y, p, &format!("{prefix}.mlp.fc1"))?.leaky_relu(LEAKY_SLOPE);
    let z = linear(&hidden, p, &format!("{prefix}.mlp.fc2"))?.add(&y)?;

    Ok(z.reshape(&[b, hp, wp, c, patch, patch])?
        .permute(&[0, 3, 1, 4, 2, 5])?
        .reshape(&[b, c, h, w])?)
}
