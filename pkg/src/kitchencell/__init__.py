"""Orchestration engine for a desk-scale robotic kitchen cell."""

__version__ = "0.1.0"
