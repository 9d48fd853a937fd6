import torch

from cellstyle import content_pipeline, style_pipeline
from cellstyle.augment import PhotometricJitter, RandomAffine, RandomFlips


def test_photometric_attaches_to_style_branch_only():
    content = content_pipeline()
    style = style_pipeline()
    assert not content.has_photometric
    assert style.has_photometric
    assert not any(t.is_photometric for t in content.transforms)
    assert sum(1 for t in style.transforms if t.is_photometric) == 1


def test_both_branches_share_the_geometric_recipe():
    content_names = [t.name for t in content_pipeline().transforms]
    style_names = [t.name for t in style_pipeline().transforms]
    assert "random_flips" in content_names and "random_flips" in style_names
    assert "random_affine" in content_names and "random_affine" in style_names


def test_flips_are_exact_and_deterministic():
    image = torch.rand(3, 8, 8)
    out1 = RandomFlips()(image, torch.Generator().manual_seed(3))
    out2 = RandomFlips()(image, torch.Generator().manual_seed(3))
    assert torch.equal(out1, out2)
    assert torch.allclose(out1.sum(), image.sum())  # flips only permute pixels


def test_affine_preserves_shape():
    image = torch.rand(3, 17, 23)
    out = RandomAffine()(image, torch.Generator().manual_seed(1))
    assert out.shape == image.shape


def test_photometric_changes_values_not_geometry():
    image = torch.zeros(3, 16, 16)
    image[:, 4:9, 4:9] = 0.8
    out = PhotometricJitter()(image, torch.Generator().manual_seed(2))
    assert out.shape == image.shape
    assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0
    # the bright square stays the brightest region
    assert float(out[:, 4:9, 4:9].mean()) > float(out[:, 10:, 10:].mean())


def test_pipeline_composition_deterministic():
    image = torch.rand(3, 32, 32)
    a = style_pipeline()(image, torch.Generator().manual_seed(7))
    b = style_pipeline()(image, torch.Generator().manual_seed(7))
    assert torch.equal(a, b)
