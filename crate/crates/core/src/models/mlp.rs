use std::path::Path;

use rand::Rng;
use visrec_autodiff::checkpoint::{load_checkpoint, save_checkpoint, NamedArray};
use visrec_autodiff::linalg::{gemm, MatRef};
use visrec_autodiff::{Graph, NodeId, Tensor};

use super::{grid_row, row_to_grid, Reconstructor, Trainable};
use crate::error::{CoreError, Result};
use crate::interferometry::{grid_visibility, VisibilityGrid, VisibilitySet};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMlpConfig {
    pub grid_size: usize,
    /// Hidden layer widths; input and output widths are `2 * grid_size^2`.
    pub hidden: Vec<usize>,
    /// Multiplies the gridded input before the first layer.
    pub input_scale: f64,
    /// Multiplies the last layer's output.
    pub output_scale: f64,
    pub init_seed: u64,
}

impl GridMlpConfig {
    pub fn new(grid_size: usize) -> Self {
        Self {
            grid_size,
            hidden: vec![1024, 1024],
            input_scale: 1.0,
            output_scale: 1.0,
            init_seed: 0,
        }
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        let io = 2 * self.grid_size * self.grid_size;
        let mut w = vec![io];
        w.extend(&self.hidden);
        w.push(io);
        w
    }
}

/// Dense grid-to-grid network: tanh hidden layers, linear output.
/// Parameters are stored as `[w0, b0, w1, b1, ...]` with `w_i` shaped
/// `[in, out]`.
#[derive(Debug, Clone)]
pub struct GridMlpModel {
    grid_size: usize,
    widths: Vec<usize>,
    input_scale: f64,
    output_scale: f64,
    params: Vec<Tensor>,
}

fn check_scale(what: &'static str, s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(CoreError::invalid(what, format!("{s} must be finite and > 0")));
    }
    Ok(())
}

impl GridMlpModel {
    /// Xavier-uniform weights, zero biases.
    pub fn new(cfg: &GridMlpConfig) -> Result<Self> {
        if cfg.grid_size < 2 {
            return Err(CoreError::invalid("grid_size", format!("{} < 2", cfg.grid_size)));
        }
        if cfg.hidden.iter().any(|&h| h == 0) {
            return Err(CoreError::invalid("hidden widths", "every layer needs at least one unit"));
        }
        check_scale("input_scale", cfg.input_scale)?;
        check_scale("output_scale", cfg.output_scale)?;
        let widths = cfg.layer_widths();
        let mut rng = rng_from_seed(cfg.init_seed);
        let mut params = Vec::with_capacity(2 * (widths.len() - 1));
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            params.push(Tensor::param(vec![fan_in, fan_out], w)?);
            params.push(Tensor::param(vec![fan_out], vec![0.0; fan_out])?);
        }
        Ok(Self {
            grid_size: cfg.grid_size,
            widths,
            input_scale: cfg.input_scale,
            output_scale: cfg.output_scale,
            params,
        })
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn scales(&self) -> (f64, f64) {
        (self.input_scale, self.output_scale)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn to_arrays(&self) -> Vec<NamedArray> {
        let mut out = vec![
            NamedArray::new("model.grid_size", vec![1], vec![self.grid_size as f64]),
            NamedArray::new(
                "model.layer_widths",
                vec![self.widths.len()],
                self.widths.iter().map(|&w| w as f64).collect(),
            ),
            NamedArray::new("model.scales", vec![2], vec![self.input_scale, self.output_scale]),
        ];
        for (i, pair) in self.params.chunks(2).enumerate() {
            out.push(NamedArray::from_tensor(format!("layer{i}.weight"), &pair[0]));
            out.push(NamedArray::from_tensor(format!("layer{i}.bias"), &pair[1]));
        }
        out
    }

    pub fn from_arrays(arrays: &[NamedArray]) -> Result<Self> {
        let find = |name: &str| {
            arrays
                .iter()
                .find(|a| a.name == name)
                .ok_or_else(|| CoreError::invalid("checkpoint", format!("missing array {name:?}")))
        };
        let as_count = |x: f64| -> Result<usize> {
            if x.fract() != 0.0 || !(1.0..=1e9).contains(&x) {
                return Err(CoreError::invalid("checkpoint", format!("{x} is not a valid size")));
            }
            Ok(x as usize)
        };
        let grid = find("model.grid_size")?;
        let grid_size = as_count(*grid.values.first().unwrap_or(&0.0))?;
        let widths = find("model.layer_widths")?
            .values
            .iter()
            .map(|&x| as_count(x))
            .collect::<Result<Vec<_>>>()?;
        let io = 2 * grid_size * grid_size;
        if widths.len() < 2 || widths[0] != io || widths[widths.len() - 1] != io {
            return Err(CoreError::invalid("checkpoint", format!("layer widths {widths:?} do not fit grid size {grid_size}")));
        }
        let scales = &find("model.scales")?.values;
        if scales.len() != 2 {
            return Err(CoreError::invalid("checkpoint", "model.scales must hold two values"));
        }
        check_scale("input_scale", scales[0])?;
        check_scale("output_scale", scales[1])?;
        let mut params = Vec::new();
        for (i, pair) in widths.windows(2).enumerate() {
            let w = find(&format!("layer{i}.weight"))?;
            let b = find(&format!("layer{i}.bias"))?;
            if w.shape != [pair[0], pair[1]] || b.shape != [pair[1]] {
                return Err(CoreError::invalid("checkpoint", format!("layer {i} has shapes {:?} / {:?}", w.shape, b.shape)));
            }
            params.push(w.to_param()?);
            params.push(b.to_param()?);
        }
        Ok(Self {
            grid_size,
            widths,
            input_scale: scales[0],
            output_scale: scales[1],
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, &self.to_arrays())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_arrays(&load_checkpoint(path)?)
    }
}

impl Reconstructor for GridMlpModel {
    fn grid_shape(&self) -> (usize, usize) {
        (self.grid_size, self.grid_size)
    }

    fn reconstruct(&self, vis: &VisibilitySet) -> Result<VisibilityGrid> {
        let x = self.encode(vis)?;
        let y = self.forward_plain(&x, 1)?;
        row_to_grid(&y, self.grid_size, self.grid_size)
    }
}

impl Trainable for GridMlpModel {
    fn parameters(&self) -> &[Tensor] {
        &self.params
    }

    fn parameters_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    fn encode(&self, vis: &VisibilitySet) -> Result<Vec<f64>> {
        let g = grid_visibility(vis, self.grid_size, self.grid_size)?;
        Ok(grid_row(&g))
    }

    fn feature_len(&self) -> usize {
        self.widths[0]
    }

    fn forward_graph(&self, g: &mut Graph, params: &[NodeId], input: NodeId) -> Result<NodeId> {
        if params.len() != self.params.len() {
            return Err(CoreError::invalid("parameter ids", format!("{} ids for {} tensors", params.len(), self.params.len())));
        }
        let mut h = g.scale(input, self.input_scale)?;
        for i in 0..self.layers() {
            h = g.matmul(h, params[2 * i])?;
            h = g.add_bias(h, params[2 * i + 1])?;
            if i + 1 < self.layers() {
                h = g.tanh(h)?;
            }
        }
        Ok(g.scale(h, self.output_scale)?)
    }

    fn forward_plain(&self, input: &[f64], rows: usize) -> Result<Vec<f64>> {
        if input.len() != rows * self.widths[0] {
            return Err(CoreError::invalid(
                "model input",
                format!("{} values for {rows} rows of {}", input.len(), self.widths[0]),
            ));
        }
        let mut h: Vec<f64> = input.iter().map(|x| x * self.input_scale).collect();
        for i in 0..self.layers() {
            let (k, n) = (self.widths[i], self.widths[i + 1]);
            let mut out = vec![0.0; rows * n];
            gemm(MatRef::new(&h, rows, k), MatRef::new(self.params[2 * i].values(), k, n), 0.0, &mut out);
            let bias = self.params[2 * i + 1].values();
            for row in out.chunks_exact_mut(n) {
                for (o, b) in row.iter_mut().zip(bias) {
                    *o += b;
                }
            }
            if i + 1 < self.layers() {
                out.iter_mut().for_each(|x| *x = x.tanh());
            }
            h = out;
        }
        h.iter_mut().for_each(|x| *x *= self.output_scale);
        if h.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonFinite("model output".into()));
        }
        Ok(h)
    }

    fn target_row(&self, grid: &VisibilityGrid) -> Result<Vec<f64>> {
        if grid.dims() != (self.grid_size, self.grid_size) {
            return Err(CoreError::ShapeMismatch {
                left: grid.dims(),
                right: (self.grid_size, self.grid_size),
            });
        }
        Ok(grid_row(grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridMlpModel {
        GridMlpModel::new(&GridMlpConfig {
            grid_size: 4,
            hidden: vec![6],
            input_scale: 0.5,
            output_scale: 2.0,
            init_seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn default_widths() {
        assert_eq!(GridMlpConfig::new(32).layer_widths(), vec![2048, 1024, 1024, 2048]);
    }

    #[test]
    fn plain_and_graph_forward_agree_bitwise() {
        let m = small();
        let x: Vec<f64> = (0..3 * 32).map(|i| (i as f64 * 0.37).sin()).collect();
        let plain = m.forward_plain(&x, 3).unwrap();
        let mut g = Graph::new();
        let mut params = m.parameters().to_vec();
        let ids = g.adopt(&mut params).unwrap();
        let input = g.constant(vec![3, 32], x).unwrap();
        let out = m.forward_graph(&mut g, &ids, input).unwrap();
        assert_eq!(g.values(out).unwrap(), &plain[..]);
    }

    #[test]
    fn checkpoint_arrays_round_trip() {
        let m = small();
        let back = GridMlpModel::from_arrays(&m.to_arrays()).unwrap();
        assert_eq!(back.layer_widths(), m.layer_widths());
        assert_eq!(back.scales(), m.scales());
        for (a, b) in back.parameters().iter().zip(m.parameters()) {
            assert_eq!(a.values(), b.values());
        }
        let mut arrays = m.to_arrays();
        arrays.retain(|a| a.name != "layer1.bias");
        assert!(GridMlpModel::from_arrays(&arrays).is_err());
    }
}
