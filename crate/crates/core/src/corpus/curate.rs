use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Culture, Gender, Prompt, TargetEntry, TargetSet};

/// Downsample the larger culture list to the size of the smaller one.
///
/// Sampling is without replacement from a ChaCha8 stream seeded with `seed`;
/// kept entries retain their original relative order. Equal-sized sets are
/// returned unchanged whatever the seed, which makes the operation idempotent.
pub fn equalize_targets(set: &TargetSet, seed: u64) -> Result<TargetSet, CorpusError> {
    for (culture, list) in [(Culture::Arab, &set.arab), (Culture::Western, &set.western)] {
        if list.is_empty() {
            return Err(CorpusError::EmptyTargets {
                aspect_id: set.aspect_id.clone(),
                culture,
            });
        }
    }
    let size = set.arab.len().min(set.western.len());
    Ok(TargetSet {
        aspect_id: set.aspect_id.clone(),
        arab: downsample(&set.arab, size, seed),
        western: downsample(&set.western, size, seed),
    })
}

fn downsample(list: &[TargetEntry], size: usize, seed: u64) -> Vec<TargetEntry> {
    if list.len() <= size {
        return list.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, list.len(), size).into_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| list[i].clone()).collect()
}

/// Targets usable with `prompt`, as `(arab, western)`.
///
/// Neutral prompts take every entry. Gendered prompts take entries of their
/// own gender plus gender-neutral entries.
pub fn applicable_targets<'a>(
    prompt: &Prompt,
    set: &'a TargetSet,
) -> Result<(Vec<&'a TargetEntry>, Vec<&'a TargetEntry>), CorpusError> {
    if prompt.aspect_id != set.aspect_id {
        return Err(CorpusError::AspectMismatch {
            prompt_id: prompt.id.clone(),
            prompt_aspect: prompt.aspect_id.clone(),
            set_aspect: set.aspect_id.clone(),
        });
    }
    let fits = |t: &&TargetEntry| {
        prompt.gender == Gender::Neutral || t.gender == prompt.gender || t.gender == Gender::Neutral
    };
    let arab: Vec<_> = set.arab.iter().filter(fits).collect();
    let western: Vec<_> = set.western.iter().filter(fits).collect();
    for (culture, list) in [(Culture::Arab, &arab), (Culture::Western, &western)] {
        if list.is_empty() {
            return Err(CorpusError::NoApplicableTargets {
                prompt_id: prompt.id.clone(),
                aspect_id: set.aspect_id.clone(),
                gender: prompt.gender,
                culture,
            });
        }
    }
    Ok((arab, western))
}
