#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "dfd/manifest.hpp"

using namespace dfd;
namespace fs = std::filesystem;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex(std::string{}) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string{"abc"}) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex(std::string{"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"}) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // Multi-block message (> 64 bytes).
    CHECK(sha256_hex(std::string(1000, 'a')) ==
          "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3");
}

TEST_CASE("streaming update equals one-shot") {
    Sha256 h;
    const std::string msg = "the quick brown fox jumps over the lazy dog";
    for (char c : msg) h.update(&c, 1);
    CHECK(h.hex_digest() == sha256_hex(msg));
}

TEST_CASE("double-vector hashing is sensitive to every bit") {
    std::vector<double> v = {1.0, 2.0, 3.0};
    const std::string a = sha256_of_doubles(v);
    v[2] = std::nextafter(3.0, 4.0);
    CHECK(sha256_of_doubles(v) != a);
}

TEST_CASE("atomic write leaves no temp file and matches content") {
    const fs::path dir = fs::temp_directory_path() / "dfd_manifest_test";
    fs::create_directories(dir);
    write_file_atomic(dir / "a.txt", "hello\n");
    std::ifstream in(dir / "a.txt");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content == "hello\n");
    CHECK_FALSE(fs::exists(dir / "a.txt.tmp"));
    CHECK(sha256_of_file(dir / "a.txt") == sha256_hex(std::string{"hello\n"}));
    fs::remove_all(dir);
}

TEST_CASE("run manifest verifies and detects tampering") {
    const fs::path dir = fs::temp_directory_path() / "dfd_runmanifest_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "sub");
    write_file_atomic(dir / "one.csv", "a,b\n1,2\n");
    write_file_atomic(dir / "sub" / "two.json", "{}\n");

    RunManifest m(dir);
    m.record(dir / "one.csv");
    m.record(dir / "sub" / "two.json");
    m.save();

    CHECK(RunManifest::verify(dir).empty());

    write_file_atomic(dir / "one.csv", "a,b\n1,3\n");
    auto bad = RunManifest::verify(dir);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0] == "one.csv");

    fs::remove(dir / "sub" / "two.json");
    bad = RunManifest::verify(dir);
    CHECK(bad.size() == 2);

    fs::remove_all(dir);
    CHECK_THROWS_AS(RunManifest::verify(dir), io_error);
}
