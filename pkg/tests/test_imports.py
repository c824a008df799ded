from importlib import import_module
def test_import_common(): import_module("semcomm_common.container")
def test_import_model(): import_module("semcomm_model.system")
def test_import_runner(): import_module("semcomm_runner.service")
