use candle_core::Tensor;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Live,
    Record,
    Replay,
}

/// Stop-gradient sites of a forward pass.
///
/// In `live` mode every site simply detaches. A `recording` tape also keeps
/// the detached values (and any discrete choices such as codebook indices);
/// after [`StopGrad::rewind`] the same tape replays them, so re-running the
/// forward at perturbed parameters evaluates the surrogate whose gradient
/// autograd computes. That is what finite-difference checks compare against.
#[derive(Debug)]
pub struct StopGrad {
    mode: Mode,
    values: Vec<Tensor>,
    choices: Vec<Vec<u32>>,
    value_cursor: usize,
    choice_cursor: usize,
}

impl Default for StopGrad {
    fn default() -> Self {
        Self::live()
    }
}

impl StopGrad {
    pub fn live() -> Self {
        Self {
            mode: Mode::Live,
            values: Vec::new(),
            choices: Vec::new(),
            value_cursor: 0,
            choice_cursor: 0,
        }
    }

    pub fn recording() -> Self {
        Self {
            mode: Mode::Record,
            ..Self::live()
        }
    }

    /// Switches a recorded tape to replay from the first site.
    pub fn rewind(&mut self) {
        if self.mode == Mode::Record {
            self.mode = Mode::Replay;
        }
        self.value_cursor = 0;
        self.choice_cursor = 0;
    }

    pub fn detach(&mut self, t: &Tensor) -> Result<Tensor> {
        match self.mode {
            Mode::Live => Ok(t.detach()),
            Mode::Record => {
                let d = t.detach();
                self.values.push(d.clone());
                Ok(d)
            }
            Mode::Replay => {
                let saved = self
                    .values
                    .get(self.value_cursor)
                    .ok_or_else(|| Error::Missing("stop-gradient tape exhausted".into()))?;
                if saved.dims() != t.dims() {
                    return Err(Error::Shape(format!(
                        "stop-gradient replay: recorded {:?}, got {:?}",
                        saved.dims(),
                        t.dims()
                    )));
                }
                self.value_cursor += 1;
                Ok(saved.clone())
            }
        }
    }

    /// A discrete decision (e.g. argmin indices) that replays verbatim.
    pub fn choice(&mut self, compute: impl FnOnce() -> Result<Vec<u32>>) -> Result<Vec<u32>> {
        match self.mode {
            Mode::Live => compute(),
            Mode::Record => {
                let c = compute()?;
                self.choices.push(c.clone());
                Ok(c)
            }
            Mode::Replay => {
                let c = self
                    .choices
                    .get(self.choice_cursor)
                    .cloned()
                    .ok_or_else(|| Error::Missing("stop-gradient tape exhausted".into()))?;
                self.choice_cursor += 1;
                Ok(c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, Var};

    #[test]
    fn replay_freezes_detached_values() {
        let x = Var::new(&[1.0f64, 2.0], &Device::Cpu).unwrap();
        let mut sg = StopGrad::recording();
        let a = sg.detach(&(x.as_tensor() * 3.0).unwrap()).unwrap();
        let idx = sg.choice(|| Ok(vec![7])).unwrap();
        assert_eq!(idx, vec![7]);
        sg.rewind();
        x.set(&Tensor::new(&[5.0f64, 5.0], &Device::Cpu).unwrap()).unwrap();
        let b = sg.detach(&(x.as_tensor() * 3.0).unwrap()).unwrap();
        assert_eq!(a.to_vec1::<f64>().unwrap(), b.to_vec1::<f64>().unwrap());
        assert_eq!(sg.choice(|| Ok(vec![0])).unwrap(), vec![7]);
        assert!(sg.detach(&a).is_err());
    }
}
