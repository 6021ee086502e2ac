// Library walk-through: synthesize an HR image, degrade it, train a small x2
// model for a few hundred steps, upscale, and compare against bicubic.
//
//   quickstart [out_dir] [iters]
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>

#include "safmn/safmn.hpp"

namespace fs = std::filesystem;
using namespace safmn;

int main(int argc, char** argv) try {
  const fs::path out = argc > 1 ? argv[1] : "quickstart-out";
  const std::uint64_t iters = argc > 2 ? std::stoull(argv[2]) : 300;
  fs::create_directories(out);

  // complexity of the full-size model at a 320x180 input
  const ModelConfig full{8, 36, 2, {}};
  std::cout << "x2 model: " << count_params(full) << " params, " << count_flops(full, 180, 320)
            << " multiply-adds at 320x180\n";

  const ImageBuffer hr_img = synthetic_image(128, 7);
  encode_png(hr_img, out / "hr.png");
  const TrainingPair pair = make_training_pair(to_tensor<double>(hr_img), 2);
  encode_png(to_image(pair.lr), out / "lr.png");

  TrainConfig cfg;
  cfg.model = ModelConfig{4, 16, 2, {}};
  cfg.iters = iters;
  cfg.seed = 7;
  cfg.log_every = 50;
  cfg.sampler.patch_size = 24;
  cfg.sampler.batch_size = 4;
  Trainer<float> trainer(cfg, {pair});
  trainer.run(&std::cout);
  write_checkpoint_file(trainer.checkpoint(), out / "model.ck");

  const auto sr = trainer.model().forward(to_tensor<float>(to_image(pair.lr)), Mode::eval);
  const ImageBuffer sr_img = to_image(sr);
  const ImageBuffer bic_img = to_image(bicubic_resize(pair.lr, 128, 128));
  encode_png(sr_img, out / "sr.png");
  encode_png(bic_img, out / "bicubic.png");

  std::cout << std::fixed << std::setprecision(3) << "Y-PSNR  model " << psnr_y(sr_img, hr_img, 2)
            << " dB, bicubic " << psnr_y(bic_img, hr_img, 2) << " dB\n"
            << "Y-SSIM  model " << ssim_y(sr_img, hr_img, 2) << ", bicubic " << ssim_y(bic_img, hr_img, 2)
            << "\nwrote " << out.string() << "/{hr,lr,sr,bicubic}.png and model.ck\n";
  return 0;
} catch (const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}
