use std::ops::Range;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::config::DcnConfig;
use crate::rng::component_rng;
use crate::{Error, Result};

/// Affine map `y = W x + b` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(out: usize, inp: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (inp + out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Self {
            weight: Array2::from_shape_simple_fn((out, inp), || dist.sample(rng)),
            bias: Array1::zeros(out),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Position of each embedding inside the concatenated input `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Belief,
    Semantic,
    Period,
}

impl Segment {
    pub const ORDER: [Segment; 3] = [Segment::Belief, Segment::Semantic, Segment::Period];

    pub fn range(self, embed_dim: usize) -> Range<usize> {
        let k = match self {
            Segment::Belief => 0,
            Segment::Semantic => 1,
            Segment::Period => 2,
        };
        k * embed_dim..(k + 1) * embed_dim
    }
}

/// Every trainable tensor. The frozen question vectors live outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DcnParameters {
    pub projection: Linear,
    pub belief: Array2<f64>,
    pub period: Array2<f64>,
    pub cross: Vec<Linear>,
    pub dense: Vec<Linear>,
    pub head: Linear,
    /// Bumped on every optimiser update; forward caches remember it.
    pub(crate) version: u64,
}

impl DcnParameters {
    /// Seeded initialisation: Glorot-uniform projection, cross, dense and head
    /// weights; zero biases; embedding tables uniform in (−0.05, 0.05).
    pub fn init(cfg: &DcnConfig, raw_dim: usize, individuals: usize, years: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if raw_dim == 0 || individuals == 0 || years == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive (raw {raw_dim}, individuals {individuals}, years {years})"
            )));
        }
        let e = cfg.embed_dim;
        let h = cfg.hidden();
        let mut rng = component_rng(seed, "dcn/init");
        let table = Uniform::new(-0.05, 0.05).expect("valid range");
        let projection = Linear::glorot(e, raw_dim, &mut rng);
        let belief = Array2::from_shape_simple_fn((individuals, e), || table.sample(&mut rng));
        let period = Array2::from_shape_simple_fn((years, e), || table.sample(&mut rng));
        let cross = (0..cfg.num_cross_layers)
            .map(|_| Linear::glorot(h, h, &mut rng))
            .collect();
        let dense = (0..cfg.num_dense_layers)
            .map(|_| Linear::glorot(h, h, &mut rng))
            .collect();
        let head = Linear::glorot(1, h, &mut rng);
        Ok(Self {
            projection,
            belief,
            period,
            cross,
            dense,
            head,
            version: 0,
        })
    }

    /// All-zero parameters with the shapes implied by `cfg`.
    pub fn zeros(cfg: &DcnConfig, raw_dim: usize, individuals: usize, years: usize) -> Self {
        let e = cfg.embed_dim;
        let h = cfg.hidden();
        Self {
            projection: Linear::zeros(e, raw_dim),
            belief: Array2::zeros((individuals, e)),
            period: Array2::zeros((years, e)),
            cross: (0..cfg.num_cross_layers).map(|_| Linear::zeros(h, h)).collect(),
            dense: (0..cfg.num_dense_layers).map(|_| Linear::zeros(h, h)).collect(),
            head: Linear::zeros(1, h),
            version: 0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let lin = |l: &Linear| Linear::zeros(l.out_dim(), l.in_dim());
        Self {
            projection: lin(&self.projection),
            belief: Array2::zeros(self.belief.raw_dim()),
            period: Array2::zeros(self.period.raw_dim()),
            cross: self.cross.iter().map(lin).collect(),
            dense: self.dense.iter().map(lin).collect(),
            head: lin(&self.head),
            version: 0,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.belief.ncols()
    }

    pub fn hidden(&self) -> usize {
        3 * self.embed_dim()
    }

    pub fn raw_dim(&self) -> usize {
        self.projection.in_dim()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) {
        self.version = self.version.wrapping_add(1);
    }

    /// `(name, shape)` of every tensor in canonical order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        self.visit(|name, shape, _| out.push((name.to_string(), shape.to_vec())));
        out
    }

    /// Visits `(name, shape, values)` in canonical order.
    pub fn visit(&self, mut f: impl FnMut(&str, &[usize], &[f64])) {
        let lin = |prefix: &str, l: &Linear, f: &mut dyn FnMut(&str, &[usize], &[f64])| {
            f(
                &format!("{prefix}.weight"),
                l.weight.shape(),
                l.weight.as_slice().expect("standard layout"),
            );
            f(
                &format!("{prefix}.bias"),
                l.bias.shape(),
                l.bias.as_slice().expect("standard layout"),
            );
        };
        lin("projection", &self.projection, &mut f);
        f(
            "belief",
            self.belief.shape(),
            self.belief.as_slice().expect("standard layout"),
        );
        f(
            "period",
            self.period.shape(),
            self.period.as_slice().expect("standard layout"),
        );
        for (i, l) in self.cross.iter().enumerate() {
            lin(&format!("cross.{i}"), l, &mut f);
        }
        for (i, l) in self.dense.iter().enumerate() {
            lin(&format!("dense.{i}"), l, &mut f);
        }
        lin("head", &self.head, &mut f);
    }

    /// Mutable counterpart of [`visit`](Self::visit), same order.
    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        fn lin(prefix: &str, l: &mut Linear, f: &mut dyn FnMut(&str, &mut [f64])) {
            f(
                &format!("{prefix}.weight"),
                l.weight.as_slice_mut().expect("standard layout"),
            );
            f(
                &format!("{prefix}.bias"),
                l.bias.as_slice_mut().expect("standard layout"),
            );
        }
        lin("projection", &mut self.projection, &mut f);
        f("belief", self.belief.as_slice_mut().expect("standard layout"));
        f("period", self.period.as_slice_mut().expect("standard layout"));
        for (i, l) in self.cross.iter_mut().enumerate() {
            lin(&format!("cross.{i}"), l, &mut f);
        }
        for (i, l) in self.dense.iter_mut().enumerate() {
            lin(&format!("dense.{i}"), l, &mut f);
        }
        lin("head", &mut self.head, &mut f);
    }

    /// Contiguous value slices in canonical order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let std = "standard layout";
        let mut out: Vec<&[f64]> = vec![
            self.projection.weight.as_slice().expect(std),
            self.projection.bias.as_slice().expect(std),
            self.belief.as_slice().expect(std),
            self.period.as_slice().expect(std),
        ];
        for l in self.cross.iter().chain(self.dense.iter()) {
            out.push(l.weight.as_slice().expect(std));
            out.push(l.bias.as_slice().expect(std));
        }
        out.push(self.head.weight.as_slice().expect(std));
        out.push(self.head.bias.as_slice().expect(std));
        out
    }

    /// Mutable value slices in canonical order.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let std = "standard layout";
        out.push(self.projection.weight.as_slice_mut().expect(std));
        out.push(self.projection.bias.as_slice_mut().expect(std));
        out.push(self.belief.as_slice_mut().expect(std));
        out.push(self.period.as_slice_mut().expect(std));
        for l in self.cross.iter_mut().chain(self.dense.iter_mut()) {
            out.push(l.weight.as_slice_mut().expect(std));
            out.push(l.bias.as_slice_mut().expect(std));
        }
        out.push(self.head.weight.as_slice_mut().expect(std));
        out.push(self.head.bias.as_slice_mut().expect(std));
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|_, _, v| out.extend_from_slice(v));
        out
    }

    pub fn num_values(&self) -> usize {
        let mut n = 0;
        self.visit(|_, _, v| n += v.len());
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(|_, _, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layout() == other.layout()
    }
}
