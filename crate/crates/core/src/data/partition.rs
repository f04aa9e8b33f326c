use std::collections::BTreeSet;

use rand::seq::index;

use super::Dataset;
use crate::error::{Error, Result};
use crate::models::LabeledBatch;
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

/// Disjoint per-client sample index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientPartition {
    indices: Vec<Vec<usize>>,
    classes: Vec<Vec<usize>>,
    dropped: usize,
}

impl ClientPartition {
    /// Wraps explicit index lists; they must be pairwise disjoint.
    pub fn from_indices(indices: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (c, list) in indices.iter().enumerate() {
            for &i in list {
                if !seen.insert(i) {
                    return Err(Error::invalid(format!("sample {i} assigned twice (client {c})")));
                }
            }
        }
        let classes = vec![Vec::new(); indices.len()];
        Ok(Self { indices, classes, dropped: 0 })
    }

    pub fn clients(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self, client: usize) -> &[usize] {
        &self.indices[client]
    }

    pub fn all_indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Classes assigned to `client` (empty for label-free partitions).
    pub fn classes(&self, client: usize) -> &[usize] {
        &self.classes[client]
    }

    /// Samples whose class no client drew.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// One batch per client, in client order. Empty clients are rejected.
    pub fn batches<T: Scalar>(&self, ds: &Dataset<T>) -> Result<Vec<LabeledBatch<T>>> {
        self.indices
            .iter()
            .enumerate()
            .map(|(c, idx)| {
                if idx.is_empty() {
                    return Err(Error::invalid(format!("client {c} received no samples")));
                }
                Ok(ds.select(idx)?.batch())
            })
            .collect()
    }

    /// The client datasets concatenated in client order, which fixes the
    /// sample order of the global residual.
    pub fn stacked<T: Scalar>(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        let order: Vec<usize> = self.indices.iter().flatten().copied().collect();
        ds.select(&order)
    }
}

/// Sample `i` goes to client `i mod N`.
pub fn partition_round_robin<T: Scalar>(ds: &Dataset<T>, clients: usize) -> Result<ClientPartition> {
    if clients == 0 {
        return Err(Error::invalid("client count must be at least 1"));
    }
    let mut indices = vec![Vec::new(); clients];
    for i in 0..ds.len() {
        indices[i % clients].push(i);
    }
    let classes = indices
        .iter()
        .map(|idx: &Vec<usize>| match ds.labels() {
            Some(l) => idx.iter().map(|&i| l[i]).collect::<BTreeSet<_>>().into_iter().collect(),
            None => Vec::new(),
        })
        .collect();
    Ok(ClientPartition { indices, classes, dropped: 0 })
}

/// Label-skew split: each client draws `classes_per_client` distinct classes
/// uniformly; every class is dealt round-robin to the clients holding it.
/// Samples of classes nobody drew are dropped and counted.
pub fn partition_noniid<T: Scalar>(
    ds: &Dataset<T>,
    clients: usize,
    classes_per_client: usize,
    seed: u64,
) -> Result<ClientPartition> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::invalid("non-IID partitioning needs class labels"))?;
    if clients == 0 {
        return Err(Error::invalid("client count must be at least 1"));
    }
    let num_classes = ds.num_classes();
    if classes_per_client == 0 || classes_per_client > num_classes {
        return Err(Error::invalid(format!(
            "classes per client must lie in 1..={num_classes}, got {classes_per_client}"
        )));
    }
    let classes: Vec<Vec<usize>> = (0..clients)
        .map(|c| {
            let mut rng = stream(seed, Purpose::Partition, c as u64);
            let mut picked = index::sample(&mut rng, num_classes, classes_per_client).into_vec();
            picked.sort_unstable();
            picked
        })
        .collect();
    let mut holders = vec![Vec::new(); num_classes];
    for (c, held) in classes.iter().enumerate() {
        for &k in held {
            holders[k].push(c);
        }
    }
    let mut indices = vec![Vec::new(); clients];
    let mut dealt = vec![0usize; num_classes];
    let mut dropped = 0;
    for (i, &label) in labels.iter().enumerate() {
        let h = &holders[label];
        if h.is_empty() {
            dropped += 1;
            continue;
        }
        indices[h[dealt[label] % h.len()]].push(i);
        dealt[label] += 1;
    }
    Ok(ClientPartition { indices, classes, dropped })
}
