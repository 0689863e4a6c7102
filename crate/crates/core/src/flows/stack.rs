use super::coupling::{CouplingCache, CouplingLayer};
use super::mlp::{param_count, Mlp};
use super::orthogonal::{OrthogonalCache, OrthogonalLayer};
use crate::diffcore::{Matrix, ParamLayout};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Architecture of a default stack: `pairs` × (coupling, orthogonal).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub pairs: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Householder vectors per orthogonal layer; `None` means `dim` rounded
    /// up to an even count, which lets the layer start as the identity.
    pub reflections: Option<usize>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { pairs: 10, hidden_width: 64, hidden_layers: 2, reflections: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Coupling(CouplingLayer<T>),
    Orthogonal(OrthogonalLayer<T>),
}

/// Shape-only description of a layer, used by the model file format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Coupling { active: Vec<usize>, passive: Vec<usize>, scale_widths: Vec<usize>, translate_widths: Vec<usize> },
    Orthogonal { reflections: usize },
}

impl LayerSpec {
    pub fn num_params(&self, dim: usize) -> usize {
        match self {
            LayerSpec::Coupling { scale_widths, translate_widths, .. } => {
                param_count(scale_widths) + param_count(translate_widths)
            }
            LayerSpec::Orthogonal { reflections } => reflections * dim,
        }
    }
}

impl<T: Scalar> Layer<T> {
    pub fn num_params(&self) -> usize {
        match self {
            Layer::Coupling(c) => c.num_params(),
            Layer::Orthogonal(o) => o.params().len(),
        }
    }

    fn forward(&self, z: &[T]) -> Result<(Vec<T>, T)> {
        match self {
            Layer::Coupling(c) => Ok(c.forward(z)),
            Layer::Orthogonal(o) => Ok((o.forward(z)?, T::zero())),
        }
    }

    fn inverse(&self, y: &[T]) -> Result<(Vec<T>, T)> {
        match self {
            Layer::Coupling(c) => Ok(c.inverse(y)),
            Layer::Orthogonal(o) => Ok((o.inverse(y)?, T::zero())),
        }
    }

    fn jacobian(&self, z: &[T]) -> Result<Matrix<T>> {
        match self {
            Layer::Coupling(c) => Ok(c.jacobian(z)),
            Layer::Orthogonal(o) => o.matrix(),
        }
    }

    fn spec(&self) -> LayerSpec {
        match self {
            Layer::Coupling(c) => LayerSpec::Coupling {
                active: c.active().to_vec(),
                passive: c.passive().to_vec(),
                scale_widths: c.scale_net().widths().to_vec(),
                translate_widths: c.translate_net().widths().to_vec(),
            },
            Layer::Orthogonal(o) => LayerSpec::Orthogonal { reflections: o.num_reflections() },
        }
    }
}

enum LayerCache<T> {
    Coupling(CouplingCache<T>),
    Orthogonal(OrthogonalCache<T>),
}

/// Everything the inverse pass of one point needs for its backward pass.
pub struct InverseCache<T> {
    caches: Vec<LayerCache<T>>,
}

/// Composition of invertible layers; `forward` applies them in order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStack<T> {
    dim: usize,
    layers: Vec<Layer<T>>,
}

fn check_finite<T: Scalar>(v: &[T], ld: T, what: &str) -> Result<()> {
    if v.iter().all(|x| x.value().is_finite()) && ld.value().is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

impl<T: Scalar> FlowStack<T> {
    /// Default stack with identity initialization.
    pub fn new<R: Rng + ?Sized>(dim: usize, config: &FlowConfig, rng: &mut R) -> Result<Self> {
        let hidden = vec![config.hidden_width; config.hidden_layers];
        let reflections = config.reflections.unwrap_or(dim + dim % 2);
        let mut layers = Vec::with_capacity(2 * config.pairs);
        for k in 0..config.pairs {
            layers.push(Layer::Coupling(CouplingLayer::new(dim, k % 2, &hidden, rng)?));
            layers.push(Layer::Orthogonal(OrthogonalLayer::new(dim, reflections, rng)?));
        }
        Self::from_layers(dim, layers)
    }

    pub fn from_layers(dim: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        for l in &layers {
            let ld = match l {
                Layer::Coupling(c) => c.dim(),
                Layer::Orthogonal(o) => o.dim(),
            };
            if ld != dim {
                return Err(Error::dims("FlowStack", format!("layer of dim {ld} in a stack of dim {dim}")));
            }
        }
        Ok(FlowStack { dim, layers })
    }

    /// Rebuild from shape descriptions and a flat parameter vector.
    pub fn from_specs(dim: usize, specs: &[LayerSpec], params: &[T]) -> Result<Self> {
        let total: usize = specs.iter().map(|s| s.num_params(dim)).sum();
        if total != params.len() {
            return Err(Error::dims("FlowStack::from_specs", format!("{} params for {total}", params.len())));
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let n = spec.num_params(dim);
            let p = &params[offset..offset + n];
            offset += n;
            layers.push(match spec {
                LayerSpec::Coupling { active, passive, scale_widths, translate_widths } => {
                    let ns = param_count(scale_widths);
                    Layer::Coupling(CouplingLayer::from_parts(
                        dim,
                        active.clone(),
                        passive.clone(),
                        Mlp::from_params(scale_widths, p[..ns].to_vec()),
                        Mlp::from_params(translate_widths, p[ns..].to_vec()),
                    )?)
                }
                LayerSpec::Orthogonal { .. } => Layer::Orthogonal(OrthogonalLayer::from_vectors(dim, p.to_vec())?),
            });
        }
        Self::from_layers(dim, layers)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            match l {
                Layer::Coupling(c) => out.extend(c.params()),
                Layer::Orthogonal(o) => out.extend_from_slice(o.params()),
            }
        }
        out
    }

    pub fn layout(&self) -> ParamLayout {
        let mut layout = ParamLayout::new();
        for (i, l) in self.layers.iter().enumerate() {
            match l {
                Layer::Coupling(c) => {
                    layout.push(format!("flow.{i}.scale"), c.scale_net().params().len());
                    layout.push(format!("flow.{i}.translate"), c.translate_net().params().len());
                }
                Layer::Orthogonal(o) => {
                    layout.push(format!("flow.{i}.householder"), o.params().len());
                }
            }
        }
        layout
    }

    /// Same architecture, new parameters (possibly of another scalar type).
    pub fn with_params<U: Scalar>(&self, params: &[U]) -> Result<FlowStack<U>> {
        if params.len() != self.num_params() {
            return Err(Error::dims(
                "FlowStack::with_params",
                format!("{} params for {}", params.len(), self.num_params()),
            ));
        }
        let mut offset = 0;
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let n = l.num_params();
                let p = &params[offset..offset + n];
                offset += n;
                match l {
                    Layer::Coupling(c) => Layer::Coupling(c.with_params(p)),
                    Layer::Orthogonal(o) => Layer::Orthogonal(o.with_params(p)),
                }
            })
            .collect();
        Ok(FlowStack { dim: self.dim, layers })
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dims("flow", format!("point of dim {} for a flow of dim {}", x.len(), self.dim)));
        }
        if !x.iter().all(|v| v.value().is_finite()) {
            return Err(Error::NonFinite("flow input".into()));
        }
        Ok(())
    }

    /// `y = h(z)` and `log|det ∂y/∂z|`.
    pub fn forward(&self, z: &[T]) -> Result<(Vec<T>, T)> {
        self.check_dim(z)?;
        let mut x = z.to_vec();
        let mut logdet = T::zero();
        for l in &self.layers {
            let (nx, ld) = l.forward(&x)?;
            x = nx;
            logdet = logdet + ld;
        }
        check_finite(&x, logdet, "flow forward output")?;
        Ok((x, logdet))
    }

    /// `z = h⁻¹(y)` and `log|det ∂z/∂y|`.
    pub fn inverse(&self, y: &[T]) -> Result<(Vec<T>, T)> {
        self.check_dim(y)?;
        let mut x = y.to_vec();
        let mut logdet = T::zero();
        for l in self.layers.iter().rev() {
            let (nx, ld) = l.inverse(&x)?;
            x = nx;
            logdet = logdet + ld;
        }
        check_finite(&x, logdet, "flow inverse output")?;
        Ok((x, logdet))
    }

    pub fn forward_trajectory(&self, points: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Vec<T>)> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| self.forward(p).map_err(|e| Error::at_point(i, e)))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }

    pub fn inverse_trajectory(&self, points: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Vec<T>)> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| self.inverse(p).map_err(|e| Error::at_point(i, e)))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }

    /// `∂y/∂z` at `z`, chained exactly through the layers.
    pub fn jacobian(&self, z: &[T]) -> Result<Matrix<T>> {
        self.check_dim(z)?;
        let mut x = z.to_vec();
        let mut jac = Matrix::identity(self.dim);
        for l in &self.layers {
            jac = l.jacobian(&x)?.matmul(&jac)?;
            x = l.forward(&x)?.0;
        }
        Ok(jac)
    }

    /// Inverse pass that keeps what [`FlowStack::inverse_backward`] needs.
    pub fn inverse_cached(&self, y: &[T]) -> Result<(Vec<T>, T, InverseCache<T>)> {
        self.check_dim(y)?;
        let mut x = y.to_vec();
        let mut logdet = T::zero();
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in self.layers.iter().rev() {
            match l {
                Layer::Coupling(c) => {
                    let (nx, ld, cache) = c.inverse_cached(&x);
                    x = nx;
                    logdet = logdet + ld;
                    caches.push(LayerCache::Coupling(cache));
                }
                Layer::Orthogonal(o) => {
                    let (nx, cache) = o.inverse_cached(&x)?;
                    x = nx;
                    caches.push(LayerCache::Orthogonal(cache));
                }
            }
        }
        check_finite(&x, logdet, "flow inverse output")?;
        Ok((x, logdet, InverseCache { caches }))
    }

    /// Accumulate into `grad` (laid out as [`FlowStack::params`]) the
    /// parameter gradient of a loss with partials `grad_z` w.r.t. the inverse
    /// output and `grad_logdet` w.r.t. the inverse log-determinant. Returns
    /// `∂L/∂y`.
    pub fn inverse_backward(&self, cache: &InverseCache<T>, grad_z: &[T], grad_logdet: T, grad: &mut [T]) -> Vec<T> {
        debug_assert_eq!(grad.len(), self.num_params());
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut o = 0;
        for l in &self.layers {
            offsets.push(o);
            o += l.num_params();
        }
        let mut g = grad_z.to_vec();
        // caches were pushed in reverse layer order
        for (ci, l) in self.layers.iter().enumerate() {
            let cache = &cache.caches[self.layers.len() - 1 - ci];
            let slot = &mut grad[offsets[ci]..offsets[ci] + l.num_params()];
            g = match (l, cache) {
                (Layer::Coupling(c), LayerCache::Coupling(cc)) => c.inverse_backward(cc, &g, grad_logdet, slot),
                (Layer::Orthogonal(ol), LayerCache::Orthogonal(oc)) => ol.inverse_backward(oc, &g, slot),
                _ => unreachable!("cache does not match layer kind"),
            };
        }
        g
    }
}
