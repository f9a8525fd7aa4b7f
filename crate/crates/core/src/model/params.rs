use std::collections::HashMap;
use std::rc::Rc;

use xdisp_autodiff::{Graph, Tensor, Var};

use crate::error::{CoreError, Result};

/// Named parameter tensors in a fixed registration order.
///
/// Tensors sit behind `Rc` so each forward tape can reference them without
/// copying; updates go through [`ParamStore::tensor_mut`] once the tapes are
/// gone.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Rc<Tensor>>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(CoreError::Config(format!("duplicate parameter {name}")));
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(Rc::new(tensor));
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| CoreError::Config(format!("missing parameter {name}")))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| self.tensors[i].as_ref())
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self, id: usize) -> &Tensor {
        &self.tensors[id]
    }

    /// Copies on write if a tape still holds the tensor.
    pub fn tensor_mut(&mut self, id: usize) -> &mut Tensor {
        Rc::make_mut(&mut self.tensors[id])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter().map(Rc::as_ref))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    /// Registers every tensor on `g`, trainable or constant.
    pub fn bind<'g>(&self, g: &'g Graph, trainable: bool) -> Vec<Var<'g>> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    g.param_shared(t.clone())
                } else {
                    g.constant_shared(t.clone())
                }
            })
            .collect()
    }
}
