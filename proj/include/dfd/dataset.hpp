#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dfd/image_io.hpp"
#include "dfd/synthetic.hpp"

namespace dfd {

// Labeled image folder pair: <root>/real/*.{png,jpg} and <root>/fake/*.{png,jpg}.
class ImageFolderDataset {
public:
    explicit ImageFolderDataset(const std::filesystem::path& root, std::size_t load_size)
        : root_(root), load_size_(load_size) {
        scan("real", 0);
        scan("fake", 1);
        if (paths_.empty())
            throw invalid_input("dataset: no images under " + root.string());
    }

    const std::vector<std::string>& real_ids() const { return real_ids_; }
    const std::vector<std::string>& fake_ids() const { return fake_ids_; }

    int label_of(const std::string& id) const {
        return id.rfind("fake/", 0) == 0 ? 1 : 0;
    }

    Image load(const std::string& id) const {
        auto it = paths_.find(id);
        if (it == paths_.end()) throw invalid_input("dataset: unknown id " + id);
        Image img = load_image(it->second, load_size_);
        img.id = id;
        return img;
    }

private:
    void scan(const std::string& sub, int label) {
        const std::filesystem::path dir = root_ / sub;
        if (!std::filesystem::exists(dir)) return;
        std::vector<std::string> ids;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
            if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
            const std::string id = sub + "/" + entry.path().stem().string();
            ids.push_back(id);
            paths_[id] = entry.path();
        }
        std::sort(ids.begin(), ids.end());
        auto& dst = label == 1 ? fake_ids_ : real_ids_;
        dst = std::move(ids);
    }

    std::filesystem::path root_;
    std::size_t load_size_;
    std::vector<std::string> real_ids_, fake_ids_;
    std::map<std::string, std::filesystem::path> paths_;
};

inline void write_synth_dataset(const std::filesystem::path& root, std::size_t n_real,
                                std::size_t n_fake, std::uint64_t seed,
                                const SyntheticConfig& cfg) {
    std::filesystem::create_directories(root / "real");
    std::filesystem::create_directories(root / "fake");
    for (std::size_t i = 0; i < n_real; ++i) {
        const Image img = synth_image(0, mix_seed(seed, i), cfg);
        save_png(img, root / "real" / (img.id + ".png"));
    }
    for (std::size_t i = 0; i < n_fake; ++i) {
        const Image img = synth_image(1, mix_seed(seed, 1000000 + i), cfg);
        save_png(img, root / "fake" / (img.id + ".png"));
    }
}

}  // namespace dfd
