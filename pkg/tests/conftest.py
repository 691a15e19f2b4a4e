def pytest_collection_modifyitems(config, items):
    """Run the long acceptance module after all unit tests."""
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")
