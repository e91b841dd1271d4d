//! Shared fixtures for the benchmarks.

use deconfrec::dataio::{InteractionDataset, PositivePair, Split};
use deconfrec::mcdcf::{BatchNoise, Contexts, ModelParams, ModelShape, TrainingTriple};
use deconfrec::rng::{stream, Stream};
use deconfrec::synth::{generate, SynthConfig};

pub fn synthetic(num_users: usize, num_items: usize) -> InteractionDataset {
    generate(&SynthConfig {
        num_users,
        num_items,
        density_target: 0.02,
        ..SynthConfig::default()
    })
    .expect("benchmark synth config is feasible")
    .0
}

/// Positive pairs with string ids, as k-core filtering receives them.
pub fn positive_pairs(ds: &InteractionDataset) -> Vec<PositivePair> {
    ds.interactions
        .iter()
        .map(|it| PositivePair {
            user_id: ds.users.key(it.user).to_owned(),
            item_id: ds.items.key(it.item).to_owned(),
        })
        .collect()
}

pub struct TrainFixture {
    pub model: ModelParams,
    pub contexts: Contexts,
    pub triples: Vec<TrainingTriple>,
    pub noise: BatchNoise,
}

/// A model over `ds` with capped contexts and one batch of triples whose
/// negatives are simply the next item index.
pub fn train_fixture(ds: &InteractionDataset, dim: usize, cap: usize, batch: usize) -> TrainFixture {
    let shape = ModelShape {
        dim,
        user_confounder: true,
        item_confounder: true,
        alpha: 0.5,
        beta: 0.5,
        init_std: 0.1,
    };
    let model = ModelParams::init(ds.num_users(), ds.num_items(), &shape, 0);
    let contexts = Contexts::capped(&Contexts::full(ds), cap, &mut stream(0, Stream::Context));
    let triples = ds
        .pairs(Split::Train)
        .take(batch)
        .map(|(user, pos)| TrainingTriple {
            user,
            pos,
            neg: (pos + 1) % ds.num_items() as u32,
        })
        .collect::<Vec<_>>();
    let noise = BatchNoise::draw(&mut stream(0, Stream::Noise), triples.len(), dim);
    TrainFixture {
        model,
        contexts,
        triples,
        noise,
    }
}
