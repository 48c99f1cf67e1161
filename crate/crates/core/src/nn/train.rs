use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::{argmax, Model};
use super::optim::Adam;
use crate::data::SphericalDataset;
use crate::error::{Error, Result};

/// One line of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum MetricRecord {
    Epoch {
        epoch: usize,
        train_loss: f64,
        train_acc: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eval_acc: Option<f64>,
    },
    Prediction {
        regime: String,
        index: usize,
        label: u8,
        predicted: u8,
    },
    Summary {
        regime: String,
        count: usize,
        accuracy: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub eval_acc: Option<f64>,
}

impl EpochStats {
    pub fn record(&self) -> MetricRecord {
        MetricRecord::Epoch {
            epoch: self.epoch,
            train_loss: self.train_loss,
            train_acc: self.train_acc,
            eval_acc: self.eval_acc,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `(label, predicted)` per example, in dataset order.
    pub predictions: Vec<(u8, u8)>,
}

impl Evaluation {
    pub fn records(&self, regime: &str) -> Vec<MetricRecord> {
        let mut out: Vec<MetricRecord> = self
            .predictions
            .iter()
            .enumerate()
            .map(|(index, &(label, predicted))| MetricRecord::Prediction {
                regime: regime.to_string(),
                index,
                label,
                predicted,
            })
            .collect();
        out.push(MetricRecord::Summary {
            regime: regime.to_string(),
            count: self.predictions.len(),
            accuracy: self.accuracy,
        });
        out
    }
}

fn check_dataset(config: &ModelConfig, data: &SphericalDataset) -> Result<()> {
    let b = config.input_bandwidth()?;
    if data.bandwidth != b {
        return Err(Error::BandwidthMismatch {
            expected: b,
            found: data.bandwidth,
        });
    }
    let classes = config.classes()?;
    if let Some(e) = data.examples.iter().find(|e| e.label as usize >= classes) {
        return Err(Error::Shape(format!(
            "label {} out of range for {classes} classes",
            e.label
        )));
    }
    Ok(())
}

/// Mini-batch Adam on cross-entropy. The shuffle generator is independent of
/// the initialization generator; both derive from `config.seed`.
pub fn train(
    config: &ModelConfig,
    data: &SphericalDataset,
    eval: Option<&SphericalDataset>,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let model = Model::new(config.clone())?;
    train_from(model, data, eval, &mut on_epoch)
}

/// Continues training an existing model with its config's settings.
pub fn train_from(
    mut model: Model,
    data: &SphericalDataset,
    eval: Option<&SphericalDataset>,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    let config = model.config().clone();
    check_dataset(&config, data)?;
    if let Some(e) = eval {
        check_dataset(&config, e)?;
    }
    if data.is_empty() {
        return Err(Error::Shape("empty training set".into()));
    }
    let t = config.train;
    let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle.set_stream(1);
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), &t);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(t.epochs);
    for epoch in 1..=t.epochs {
        order.shuffle(&mut shuffle);
        let (mut loss, mut correct) = (0.0, 0);
        for chunk in order.chunks(t.batch_size) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (&data.examples[i].signal, data.examples[i].label as usize))
                .collect();
            let (mut grad, l, c) = model.batch_gradient(&batch)?;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grad);
            model.set_params(&params)?;
            loss += l;
            correct += c;
        }
        let eval_acc = match eval {
            Some(e) => Some(evaluate(&model, e)?.accuracy),
            None => None,
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss / data.len() as f64,
            train_acc: correct as f64 / data.len() as f64,
            eval_acc,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { model, history })
}

/// Accuracy by argmax of the predicted probabilities.
pub fn evaluate(model: &Model, data: &SphericalDataset) -> Result<Evaluation> {
    check_dataset(model.config(), data)?;
    let predictions: Vec<(u8, u8)> = data
        .examples
        .par_iter()
        .map(|e| Ok((e.label, argmax(&model.forward(&e.signal)?) as u8)))
        .collect::<Result<_>>()?;
    let correct = predictions.iter().filter(|(l, p)| l == p).count();
    let accuracy = if predictions.is_empty() {
        0.0
    } else {
        correct as f64 / predictions.len() as f64
    };
    Ok(Evaluation { accuracy, predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_examples, load_mnist_idx, LabeledSphericalExample, MnistPaths};
    use crate::gft::{s2_ifft, S2Spectrum};
    use crate::nn::config::{Head, TrainConfig};
    use crate::nn::model::Layer;
    use std::path::Path;

    fn mnist(prefix: &str, n: usize, b: usize) -> SphericalDataset {
        let paths = MnistPaths::in_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"), prefix);
        let digits: Vec<_> = load_mnist_idx(&paths.images, &paths.labels)
            .unwrap()
            .into_iter()
            .take(n)
            .collect();
        build_examples(&digits, b, false, 0).unwrap()
    }

    #[test]
    fn constant_prediction_on_matching_labels_is_perfect() {
        let config = ModelConfig::s2_so3_classifier([8, 4, 2], [2, 3], 10, Head::Spatial, 1);
        let model = Model::new(config.clone()).unwrap();
        let layers = model
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Linear { dim_in, dim_out, .. } => {
                    let mut bias = vec![0.0; *dim_out];
                    bias[6] = 1.0;
                    Layer::Linear {
                        dim_in: *dim_in,
                        dim_out: *dim_out,
                        weights: vec![0.0; dim_in * dim_out],
                        bias,
                    }
                }
                other => other.clone(),
            })
            .collect();
        let model = Model::from_layers(config, layers).unwrap();
        let mut data = mnist("t10k", 20, 8);
        data.examples.iter_mut().for_each(|e| e.label = 6);
        assert_eq!(evaluate(&model, &data).unwrap().accuracy, 1.0);
    }

    #[test]
    fn random_model_is_near_chance_on_balanced_data() {
        let b = 8;
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(2);
        let examples = (0..300)
            .map(|i| LabeledSphericalExample {
                signal: s2_ifft(&S2Spectrum::random_real(b, 1, &mut rng).unwrap()).unwrap(),
                label: (i % 10) as u8,
                rotation_applied: None,
            })
            .collect();
        let data = SphericalDataset { bandwidth: b, examples };
        for seed in 0..3 {
            let model = Model::new(ModelConfig::s2_so3_classifier(
                [b, 4, 3],
                [4, 6],
                10,
                Head::Spatial,
                seed,
            ))
            .unwrap();
            let acc = evaluate(&model, &data).unwrap().accuracy;
            assert!((acc - 0.1).abs() <= 0.03, "{acc}");
        }
    }

    #[test]
    fn overfits_fifty_examples() {
        let data = mnist("train", 50, 8);
        let mut config = ModelConfig::s2_so3_classifier([8, 4, 3], [8, 10], 10, Head::Spatial, 3);
        config.train = TrainConfig {
            learning_rate: 5e-3,
            batch_size: 10,
            epochs: 200,
            ..TrainConfig::default()
        };
        let mut best = f64::INFINITY;
        let mut model = Model::new(config.clone()).unwrap();
        // Stepped by hand so the run can stop once the target is met.
        let mut params = model.params();
        let mut adam = Adam::new(params.len(), &config.train);
        let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        for _ in 0..200 {
            order.shuffle(&mut shuffle);
            let mut loss = 0.0;
            for chunk in order.chunks(10) {
                let batch: Vec<_> = chunk
                    .iter()
                    .map(|&i| (&data.examples[i].signal, data.examples[i].label as usize))
                    .collect();
                let (mut g, l, _) = model.batch_gradient(&batch).unwrap();
                g.iter_mut().for_each(|v| *v /= batch.len() as f64);
                adam.step(&mut params, &g);
                model.set_params(&params).unwrap();
                loss += l;
            }
            best = best.min(loss / data.len() as f64);
            if best < 0.05 {
                break;
            }
        }
        assert!(best < 0.05, "final loss {best}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = mnist("t10k", 40, 8);
        let mut config = ModelConfig::s2_so3_classifier([8, 4, 2], [3, 4], 10, Head::Spatial, 5);
        config.train.epochs = 2;
        config.train.batch_size = 8;
        let a = train(&config, &data, Some(&data), |_| {}).unwrap();
        let b = train(&config, &data, Some(&data), |_| {}).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 2);
    }

    #[test]
    fn metric_records_serialize_as_tagged_lines() {
        let r = MetricRecord::Epoch {
            epoch: 1,
            train_loss: 0.5,
            train_acc: 0.8,
            eval_acc: None,
        };
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(line, r#"{"record":"epoch","epoch":1,"train_loss":0.5,"train_acc":0.8}"#);
        assert_eq!(serde_json::from_str::<MetricRecord>(&line).unwrap(), r);
    }
}
