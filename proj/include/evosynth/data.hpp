#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evosynth/network.hpp"
#include "evosynth/tensor.hpp"

namespace evo {

struct Sample {
    std::string name;
    Tensor image;  // {C,H,W}, values in [0,1]
    Tensor mask;   // {H,W}, values exactly 0 or 1
};

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;
    std::string provenance;
};

// Seeded synthetic saliency task: smoothed-noise background with 1-3 bright
// filled shapes (ellipse / rectangle / triangle); mask = union of shapes,
// rejection-sampled until the foreground covers between 5% and 50% of the
// canvas. Split 50/10/40 train/validation/test in generation order.
// Requires count >= 3 and both dimensions >= 16.
DatasetSplit generate_synthetic(std::uint64_t seed, int count, int height,
                                int width);

// Ingests images/<name>.<ext> paired with masks/<name>.<ext> (pairing by
// basename stem), scales images to [0,1], binarizes masks at intensity 128,
// and splits alphabetically by the given fractions (test takes the
// remainder). Throws IngestionError naming any unmatched or unreadable file.
DatasetSplit load_directory(const std::string& images_dir,
                            const std::string& masks_dir, double train_frac,
                            double val_frac, double test_frac);

// Saliency samples as generic training examples (target {1,H,W}).
std::vector<Example> to_examples(const std::vector<Sample>& samples);

// Writes single-channel samples as 8-bit grayscale PNGs under dir/images
// and dir/masks, in split order (train, validation, test).
void write_dataset(const DatasetSplit& split, const std::string& dir);

}  // namespace evo
