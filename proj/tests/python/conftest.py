import os
import sys

# When run from ctest the extension sits in the build tree, not in an installed package.
_module_dir = os.environ.get("ETSO_MODULE_DIR")
_package_dir = os.environ.get("ETSO_PACKAGE_DIR")
if _module_dir and _package_dir:
    import importlib.util

    spec = importlib.util.spec_from_file_location(
        "etso",
        os.path.join(_package_dir, "etso", "__init__.py"),
        submodule_search_locations=[os.path.join(_package_dir, "etso"), _module_dir],
    )
    module = importlib.util.module_from_spec(spec)
    sys.modules["etso"] = module
    spec.loader.exec_module(module)
