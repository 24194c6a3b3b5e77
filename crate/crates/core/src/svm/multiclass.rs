use std::collections::BTreeSet;

use ndarray::{Array2, Axis};

use super::{train_from_gram, BinarySvm, KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-dimension affine map fitted on training vectors: `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    /// Population statistics; constant dimensions get unit scale.
    pub fn fit(x: &Array2<T>) -> Self {
        let n = T::from_count(x.nrows().max(1));
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for c in x.axis_iter(Axis(1)) {
            let m = c.iter().copied().sum::<T>() / n;
            let sd = (c.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n).sqrt();
            mean.push(m);
            scale.push(if sd > T::zero() { sd } else { T::one() });
        }
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn apply_rows(&self, x: &Array2<T>) -> Array2<T> {
        Array2::from_shape_fn(x.dim(), |(i, j)| (x[[i, j]] - self.mean[j]) / self.scale[j])
    }
}

/// One-vs-one ensemble. Pair `(a, b)` with `a < b` treats class `a` as `+1`;
/// pairs are stored in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct MulticlassSvm<T> {
    pub classes: Vec<String>,
    pub pairs: Vec<BinarySvm<T>>,
    pub kernel: KernelSpec,
    pub c: f64,
    pub standardizer: Option<Standardizer<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub label: String,
    pub votes: Vec<usize>,
    /// Summed absolute scores of the pairwise contests each class won.
    pub margins: Vec<f64>,
}

pub(crate) fn class_index(labels: &[String]) -> Result<(Vec<String>, Vec<usize>)> {
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label collected above"))
        .collect();
    Ok((classes, idx))
}

/// Pairwise models from a kernel matrix over `rows`; `y` indexes `classes`.
pub(crate) fn train_pairs<T: Real>(
    gram: &Array2<f64>,
    rows: &Array2<T>,
    y: &[usize],
    n_classes: usize,
    kernel: KernelSpec,
    c: f64,
) -> Result<Vec<BinarySvm<T>>> {
    let mut pairs = Vec::with_capacity(n_classes * (n_classes - 1) / 2);
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            let sub =
                Array2::from_shape_fn((idx.len(), idx.len()), |(p, q)| gram[[idx[p], idx[q]]]);
            let labels: Vec<i8> = idx
                .iter()
                .map(|&i| if y[i] == a { 1 } else { -1 })
                .collect();
            pairs.push(train_from_gram(
                &sub,
                &rows.select(Axis(0), &idx),
                &labels,
                kernel,
                c,
            )?);
        }
    }
    Ok(pairs)
}

impl<T: Real> MulticlassSvm<T> {
    /// Trains every pairwise model. RBF inputs are standardized with the
    /// training statistics first; linear inputs are used as given.
    pub fn train(x: &Array2<T>, labels: &[String], kernel: KernelSpec, c: f64) -> Result<Self> {
        kernel.validate()?;
        if x.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: x.nrows(),
                got: labels.len(),
            });
        }
        let (classes, y) = class_index(labels)?;
        let standardizer = (kernel.kind == KernelKind::Rbf).then(|| Standardizer::fit(x));
        let rows = match &standardizer {
            Some(s) => s.apply_rows(x),
            None => x.as_standard_layout().into_owned(),
        };
        let gram = kernel.gram(&rows);
        let pairs = train_pairs(&gram, &rows, &y, classes.len(), kernel, c)?;
        Ok(Self {
            classes,
            pairs,
            kernel,
            c,
            standardizer,
        })
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].dim()
    }

    pub fn all_converged(&self) -> bool {
        self.pairs.iter().all(|p| p.converged)
    }

    pub fn predict(&self, x: &[T]) -> Result<Prediction> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let z = match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        };
        Ok(vote(&self.classes, &self.pairs, &z))
    }
}

/// Majority vote; ties go to the larger summed winning margin, then to the
/// earlier class.
pub(crate) fn vote<T: Real>(classes: &[String], pairs: &[BinarySvm<T>], x: &[T]) -> Prediction {
    let n = classes.len();
    let mut votes = vec![0usize; n];
    let mut margins = vec![0.0f64; n];
    let mut p = 0;
    for a in 0..n {
        for b in a + 1..n {
            let s = pairs[p].decision_unchecked(x).as_f64();
            let winner = if s >= 0.0 { a } else { b };
            votes[winner] += 1;
            margins[winner] += s.abs();
            p += 1;
        }
    }
    let mut best = 0;
    for k in 1..n {
        if votes[k] > votes[best] || (votes[k] == votes[best] && margins[k] > margins[best]) {
            best = k;
        }
    }
    Prediction {
        class: best,
        label: classes[best].clone(),
        votes,
        margins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::tests::blobs;
    use crate::svm::train_binary;

    fn names(lab: &[usize]) -> Vec<String> {
        lab.iter().map(|l| format!("s{l:02}")).collect()
    }

    #[test]
    fn two_classes_agree_with_binary() {
        let (x, lab) = blobs(&[&[-1.0, 0.0], &[1.0, 0.0]], 10, 0.7, 1);
        let m = MulticlassSvm::train(&x, &names(&lab), KernelSpec::linear(), 1.0).unwrap();
        assert_eq!(m.pairs.len(), 1);
        let y: Vec<i8> = lab.iter().map(|&l| if l == 0 { 1 } else { -1 }).collect();
        let b = train_binary(&x, &y, KernelSpec::linear(), 1.0).unwrap();
        for i in -5..5 {
            let p = [i as f64 * 0.4, 0.3];
            let want = if b.predict(&p).unwrap().1 == 1 {
                "s00"
            } else {
                "s01"
            };
            assert_eq!(m.predict(&p).unwrap().label, want);
        }
    }

    #[test]
    fn fourteen_classes_give_91_models() {
        let centers: Vec<Vec<f64>> = (0..14)
            .map(|k| vec![k as f64 * 3.0, (k % 3) as f64])
            .collect();
        let refs: Vec<&[f64]> = centers.iter().map(|c| c.as_slice()).collect();
        let (x, lab) = blobs(&refs, 3, 0.1, 2);
        let m = MulticlassSvm::train(&x, &names(&lab), KernelSpec::linear(), 10.0).unwrap();
        assert_eq!(m.pairs.len(), 91);
        assert_eq!(m.classes.len(), 14);
    }

    #[test]
    fn three_blobs_resubstitution() {
        let (x, lab) = blobs(&[&[-4.0, 0.0], &[4.0, 0.0], &[0.0, 5.0]], 20, 0.8, 3);
        let labels = names(&lab);
        for kernel in [KernelSpec::linear(), KernelSpec::rbf(2.0)] {
            let m = MulticlassSvm::train(&x, &labels, kernel, 10.0).unwrap();
            for (row, l) in x.rows().into_iter().zip(&labels) {
                assert_eq!(&m.predict(row.as_slice().unwrap()).unwrap().label, l);
            }
            assert_eq!(m.standardizer.is_some(), kernel.kind == KernelKind::Rbf);
        }
    }

    #[test]
    fn tie_breaks_by_margin_then_order() {
        // Three classes, each winning once: a cyclic vote.
        let mk = |bias: f64| BinarySvm {
            support_vectors: Array2::zeros((1, 1)),
            dual_coefs: vec![0.0],
            bias,
            kernel: KernelSpec::linear(),
            c: 1.0,
            dual_objective: 0.0,
            converged: true,
        };
        let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        // (a,b): a wins by 1; (a,c): c wins by 2; (b,c): b wins by 3.
        let p = vote(&classes, &[mk(1.0), mk(-2.0), mk(3.0)], &[0.0]);
        assert_eq!(p.votes, vec![1, 1, 1]);
        assert_eq!(p.label, "b");
        let p = vote(&classes, &[mk(1.0), mk(-1.0), mk(1.0)], &[0.0]);
        assert_eq!(p.label, "a");
    }

    #[test]
    fn standardizer_handles_constant_dims() {
        let x = ndarray::array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.apply(&[1.0, 5.0]), vec![-1.0, 0.0]);
    }
}
